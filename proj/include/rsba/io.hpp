#pragma once

#include "rsba/problem.hpp"

#include <iosfwd>
#include <string>

namespace rsba {

// RSBAL v1, line oriented:
//   RSBAL v1 units=normalized-row
//   <n_cameras> <n_points> <n_observations>
//   <cam_id> <point_id> <u> <v>                       x n_observations (pixels)
//   <xi(3)> <t0(3)> <omega(3)> <d(3)> <fx> <fy>       per camera
//   <cx> <cy>
//   <X> <Y> <Z>                                       x n_points
//   <sigma11> <sigma12> <sigma22>                     optional noise prior
// Blank lines and lines starting with '#' are ignored.

void write_problem(std::ostream& os, const Problem& problem);
void write_problem(const Problem& problem, const std::string& path);

/// Throws ParseError (with line number), IdOutOfRange or CountMismatch.
Problem read_problem(std::istream& is);
Problem read_problem(const std::string& path);

std::string format_double(double x);

}  // namespace rsba

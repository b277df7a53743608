#include "rsba/io.hpp"

#include "rsba/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

namespace rsba {

namespace {

constexpr std::string_view kFormatTag = "RSBAL v1";
constexpr std::string_view kUnitsTag = "units=normalized-row";

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_problem(std::ostream& os, const Problem& problem) {
  auto num = [&](double x) { os << format_double(x); };
  os << kFormatTag << ' ' << kUnitsTag << '\n';
  os << problem.cameras.size() << ' ' << problem.points.size() << ' ' << problem.observations.size()
     << '\n';
  for (const auto& obs : problem.observations) {
    const Vec2 m = obs.m ? *obs.m : denormalize_measurement(obs.q, problem.cameras.at(obs.cam_id));
    os << obs.cam_id << ' ' << obs.point_id << ' ';
    num(m.x());
    os << ' ';
    num(m.y());
    os << '\n';
  }
  for (const auto& cam : problem.cameras) {
    const bool exact = cam.xi.allFinite() && so3_exp(cam.xi) == cam.R0;
    const Vec3 xi = exact ? cam.xi : so3_log(cam.R0);
    const double fields[14] = {xi.x(),      xi.y(),      xi.z(),      cam.t0.x(), cam.t0.y(),
                               cam.t0.z(),  cam.omega.x(), cam.omega.y(), cam.omega.z(), cam.d.x(),
                               cam.d.y(),   cam.d.z(),   cam.fx,      cam.fy};
    for (int i = 0; i < 14; ++i) {
      if (i) os << ' ';
      num(fields[i]);
    }
    os << '\n';
    num(cam.cx);
    os << ' ';
    num(cam.cy);
    os << '\n';
  }
  for (const auto& P : problem.points) {
    num(P.x());
    os << ' ';
    num(P.y());
    os << ' ';
    num(P.z());
    os << '\n';
  }
  const Mat2& S = problem.prior.Sigma;
  num(S(0, 0));
  os << ' ';
  num(S(0, 1));
  os << ' ';
  num(S(1, 1));
  os << '\n';
}

void write_problem(const Problem& problem, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_problem(os, problem);
  os.flush();
  if (!os) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
  std::string text;
};

class Reader {
 public:
  explicit Reader(std::istream& is) {
    std::string text;
    std::size_t n = 0;
    while (std::getline(is, text)) {
      ++n;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      const auto first = text.find_first_not_of(" \t");
      if (first == std::string::npos || text[first] == '#') continue;
      lines_.push_back({n, {}, std::move(text)});
    }
    end_line_ = n + 1;
    for (auto& l : lines_) {
      std::string_view sv(l.text);
      std::size_t i = 0;
      while (i < sv.size()) {
        while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < sv.size() && sv[j] != ' ' && sv[j] != '\t') ++j;
        if (j > i) l.tokens.push_back(sv.substr(i, j - i));
        i = j;
      }
    }
  }

  bool done() const { return pos_ >= lines_.size(); }

  const Line& next(const std::string& what) {
    if (done()) throw ParseError(end_line_, "unexpected end of file, missing " + what);
    return lines_[pos_++];
  }

 private:
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  std::size_t end_line_ = 1;
};

void expect_fields(const Line& l, std::size_t n, const std::string& what) {
  if (l.tokens.size() != n) {
    throw ParseError(l.number, what + ": expected " + std::to_string(n) + " fields, found " +
                                   std::to_string(l.tokens.size()));
  }
}

double parse_double(const Line& l, std::string_view tok, const std::string& what) {
  double x = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError(l.number, what + ": invalid number '" + std::string(tok) + "'");
  }
  return x;
}

std::size_t parse_index(const Line& l, std::string_view tok, const std::string& what) {
  std::size_t x = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError(l.number, what + ": invalid non-negative integer '" + std::string(tok) + "'");
  }
  return x;
}

}  // namespace

Problem read_problem(std::istream& is) {
  Reader rd(is);
  {
    const Line& h = rd.next("header");
    if (h.tokens.size() < 2 || h.tokens[0] != "RSBAL" || h.tokens[1] != "v1") {
      throw ParseError(h.number, "expected header '" + std::string(kFormatTag) + "'");
    }
    bool units = false;
    for (std::size_t i = 2; i < h.tokens.size(); ++i) {
      if (h.tokens[i] == kUnitsTag) {
        units = true;
      } else if (h.tokens[i].substr(0, 6) == "units=") {
        throw ParseError(h.number, "unsupported " + std::string(h.tokens[i]));
      }
    }
    if (!units) throw ParseError(h.number, "header lacks " + std::string(kUnitsTag));
  }
  const Line& c = rd.next("counts record");
  expect_fields(c, 3, "counts record");
  const std::size_t nc = parse_index(c, c.tokens[0], "camera count");
  const std::size_t np = parse_index(c, c.tokens[1], "point count");
  const std::size_t no = parse_index(c, c.tokens[2], "observation count");

  Problem p;
  p.observations.resize(no);
  for (std::size_t k = 0; k < no; ++k) {
    const std::string what = "observation record " + std::to_string(k);
    const Line& l = rd.next(what);
    expect_fields(l, 4, what);
    Observation& o = p.observations[k];
    o.cam_id = parse_index(l, l.tokens[0], what);
    o.point_id = parse_index(l, l.tokens[1], what);
    if (o.cam_id >= nc) {
      throw ParseError(l.number, what + ": camera id " + std::to_string(o.cam_id) + " out of range",
                       ErrorCode::IdOutOfRange);
    }
    if (o.point_id >= np) {
      throw ParseError(l.number, what + ": point id " + std::to_string(o.point_id) + " out of range",
                       ErrorCode::IdOutOfRange);
    }
    o.m = Vec2(parse_double(l, l.tokens[2], what), parse_double(l, l.tokens[3], what));
  }

  p.cameras.resize(nc);
  for (std::size_t j = 0; j < nc; ++j) {
    const std::string what = "camera record " + std::to_string(j);
    const Line& a = rd.next(what);
    expect_fields(a, 14, what);
    double f[14];
    for (int i = 0; i < 14; ++i) f[i] = parse_double(a, a.tokens[i], what);
    const Line& b = rd.next(what + " principal point");
    expect_fields(b, 2, what + " principal point");
    RsCamera& cam = p.cameras[j];
    set_rotation_vector(cam, Vec3(f[0], f[1], f[2]));
    cam.t0 = Vec3(f[3], f[4], f[5]);
    cam.omega = Vec3(f[6], f[7], f[8]);
    cam.d = Vec3(f[9], f[10], f[11]);
    cam.fx = f[12];
    cam.fy = f[13];
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw ParseError(a.number, what + ": focal lengths must be > 0");
    cam.cx = parse_double(b, b.tokens[0], what);
    cam.cy = parse_double(b, b.tokens[1], what);
  }

  p.points.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const std::string what = "point record " + std::to_string(i);
    const Line& l = rd.next(what);
    expect_fields(l, 3, what);
    p.points[i] = Vec3(parse_double(l, l.tokens[0], what), parse_double(l, l.tokens[1], what),
                       parse_double(l, l.tokens[2], what));
  }

  if (!rd.done()) {
    const Line& l = rd.next("noise prior");
    if (l.tokens.size() != 3) {
      throw ParseError(l.number, "more records than the header counts declare", ErrorCode::CountMismatch);
    }
    const std::string what = "noise prior record";
    const double s11 = parse_double(l, l.tokens[0], what);
    const double s12 = parse_double(l, l.tokens[1], what);
    const double s22 = parse_double(l, l.tokens[2], what);
    if (!(s11 > 0.0) || !(s11 * s22 - s12 * s12 > 0.0)) {
      throw ParseError(l.number, "noise prior is not positive definite");
    }
    p.prior.Sigma << s11, s12, s12, s22;
    if (!rd.done()) {
      const Line& extra = rd.next("end of file");
      throw ParseError(extra.number, "more records than the header counts declare",
                       ErrorCode::CountMismatch);
    }
  }

  for (auto& o : p.observations) o.q = normalize_measurement(*o.m, p.cameras[o.cam_id]);
  return p;
}

Problem read_problem(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_problem(is);
}

}  // namespace rsba

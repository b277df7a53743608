#include "rsba/error.hpp"
#include "rsba/io.hpp"
#include "rsba/synthetic.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

namespace rsba {
namespace {

std::string serialize(const Problem& p) {
  std::ostringstream os;
  write_problem(os, p);
  return os.str();
}

Problem parse(const std::string& text) {
  std::istringstream is(text);
  return read_problem(is);
}

void expect_bit_equal(const Problem& a, const Problem& b) {
  ASSERT_EQ(a.cameras.size(), b.cameras.size());
  ASSERT_EQ(a.points.size(), b.points.size());
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t c = 0; c < a.cameras.size(); ++c) {
    EXPECT_EQ(a.cameras[c].R0, b.cameras[c].R0);
    EXPECT_EQ(a.cameras[c].t0, b.cameras[c].t0);
    EXPECT_EQ(a.cameras[c].omega, b.cameras[c].omega);
    EXPECT_EQ(a.cameras[c].d, b.cameras[c].d);
    EXPECT_EQ(a.cameras[c].fx, b.cameras[c].fx);
    EXPECT_EQ(a.cameras[c].fy, b.cameras[c].fy);
    EXPECT_EQ(a.cameras[c].cx, b.cameras[c].cx);
    EXPECT_EQ(a.cameras[c].cy, b.cameras[c].cy);
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
  for (std::size_t k = 0; k < a.observations.size(); ++k) {
    EXPECT_EQ(a.observations[k].cam_id, b.observations[k].cam_id);
    EXPECT_EQ(a.observations[k].point_id, b.observations[k].point_id);
    EXPECT_EQ(*a.observations[k].m, *b.observations[k].m);
    EXPECT_EQ(a.observations[k].q, b.observations[k].q);
  }
  EXPECT_EQ(a.prior.Sigma, b.prior.Sigma);
}

TEST(Io, DefaultSceneRoundtrip) {
  SceneConfig cfg;
  cfg.seed = 110;
  const Problem p = perturb_initialization(add_noise(generate_scene(cfg).problem, 1.0, 1),
                                           PerturbationMagnitudes{}, 2);
  const std::string text = serialize(p);
  const Problem back = parse(text);
  expect_bit_equal(p, back);
  EXPECT_EQ(serialize(back), text);
}

TEST(Io, FileRoundtrip) {
  SceneConfig cfg;
  cfg.seed = 111;
  Problem p = generate_scene(cfg).problem;
  p.prior.Sigma << 2.0, 0.3, 0.3, 1.5;
  const std::string path =
      (std::filesystem::temp_directory_path() / ("rsba_io_" + std::to_string(::getpid()) + ".rsbal"))
          .string();
  write_problem(p, path);
  expect_bit_equal(p, read_problem(path));
  std::remove(path.c_str());
  try {
    read_problem(path);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Io, EmptyProblem) {
  const Problem empty;
  const std::string text = serialize(empty);
  EXPECT_EQ(text, "RSBAL v1 units=normalized-row\n0 0 0\n1 0 1\n");
  const Problem back = parse(text);
  EXPECT_TRUE(back.cameras.empty());
  EXPECT_TRUE(back.points.empty());
  EXPECT_TRUE(back.observations.empty());
}

TEST(Io, FormatDoubleIsLossless) {
  std::mt19937_64 rng(112);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    double x;
    const std::uint64_t b = bits(rng);
    std::memcpy(&x, &b, sizeof x);
    if (!std::isfinite(x)) continue;
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Io, CommentsBlankLinesAndMissingPrior) {
  const std::string text =
      "# generated by hand\n"
      "RSBAL v1 units=normalized-row\n"
      "\n"
      "1 1 1\n"
      "0 0 650 530\n"
      "   # camera\n"
      "0 0 0 0 0 10 0 0 0 0 0 0 1000 1000\r\n"
      "640 540\n"
      "0.5 -0.5 1\n";
  const Problem p = parse(text);
  EXPECT_EQ(p.prior.Sigma, Mat2::Identity());
  EXPECT_EQ(p.points[0], Vec3(0.5, -0.5, 1));
  EXPECT_EQ(p.observations[0].q, Vec2(0.01, -0.01));
}

ErrorCode parse_error_code(const std::string& text, std::size_t* line, std::string* what) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    *line = e.line();
    *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "parsed";
  return ErrorCode::InvalidArgument;
}

TEST(Io, TruncatedFileNamesMissingRecord) {
  SceneConfig cfg;
  cfg.seed = 113;
  const std::string text = serialize(generate_scene(cfg).problem);
  // Cut right after the second camera's principal point line.
  std::size_t cut = 0;
  const std::size_t keep = 2 + 5 * 56 + 2 * 2;
  for (std::size_t i = 0; i < keep; ++i) cut = text.find('\n', cut) + 1;
  std::size_t line = 0;
  std::string what;
  EXPECT_EQ(parse_error_code(text.substr(0, cut), &line, &what), ErrorCode::ParseError);
  EXPECT_EQ(line, keep + 1);
  EXPECT_NE(what.find("camera record 2"), std::string::npos) << what;
}

TEST(Io, Errors) {
  const std::string head = "RSBAL v1 units=normalized-row\n";
  const std::string cam = "0 0 0 0 0 10 0 0 0 0 0 0 1000 1000\n640 540\n";
  std::size_t line = 0;
  std::string what;

  EXPECT_EQ(parse_error_code("RSBAL v2 units=normalized-row\n0 0 0\n", &line, &what),
            ErrorCode::ParseError);
  EXPECT_EQ(line, 1u);
  EXPECT_EQ(parse_error_code("RSBAL v1 units=pixels\n0 0 0\n", &line, &what), ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code(head + "1 1 1\n1 0 1 1\n" + cam + "0 0 1\n", &line, &what),
            ErrorCode::IdOutOfRange);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(parse_error_code(head + "1 1 1\n0 3 1 1\n" + cam + "0 0 1\n", &line, &what),
            ErrorCode::IdOutOfRange);
  EXPECT_EQ(parse_error_code(head + "1 1 1\n0 0 1 x\n" + cam + "0 0 1\n", &line, &what),
            ErrorCode::ParseError);
  EXPECT_NE(what.find("invalid number 'x'"), std::string::npos);
  EXPECT_EQ(parse_error_code(head + "1 1 1\n0 0 1 1\n" + cam + "0 0 1\n1 0 1\n0 0 0\n", &line, &what),
            ErrorCode::CountMismatch);
  EXPECT_EQ(line, 8u);
  EXPECT_EQ(parse_error_code(head + "1 1 0\n" + cam + "0 0 1\n1 2 1\n", &line, &what),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error_code(head + "1 1 0\n" + cam + "0 0 1\n1 0 1 2\n", &line, &what),
            ErrorCode::CountMismatch);
}

TEST(Io, Canonical) {
  SceneConfig cfg;
  cfg.seed = 114;
  const Problem a = generate_scene(cfg).problem;
  Problem b = a;
  // Same values through a different path: R0 rebuilt from its rotation vector.
  for (RsCamera& cam : b.cameras) set_rotation_vector(cam, cam.xi);
  EXPECT_EQ(serialize(a), serialize(b));
}

}  // namespace
}  // namespace rsba

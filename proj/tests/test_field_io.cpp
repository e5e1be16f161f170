#include "doctest.h"
#include "hmfg/field_io.hpp"

#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>

using namespace hmfg;

TEST_CASE("binary round trip is bit exact") {
  const TorusGrid g(2, 12);
  TimeField f(g, uniform_times(0.3, 3));
  for (Index k = 0; k < f.frame_count(); ++k)
    for (Index i = 0; i < g.size(); ++i) f.frames(i, k) = std::sin(0.37 * double(i) + double(k)) / 3.0;
  std::stringstream ss;
  write_binary(ss, f);
  CHECK(ss.str().size() == 16 + 8 * std::size_t(g.size() * f.frame_count()));
  const TimeField back = read_binary(ss);
  CHECK(back.grid.dim() == 2);
  CHECK(back.grid.n() == 12);
  CHECK(back.frame_count() == 4);
  CHECK(back.frames == f.frames);
  for (Index k = 0; k < 4; ++k) CHECK(back.t[k] == doctest::Approx(f.t[k]).epsilon(1e-15));
}

TEST_CASE("binary header layout") {
  const TorusGrid g(1, 8);
  std::stringstream ss;
  write_binary(ss, Field::constant(g, 2.5));
  const std::string s = ss.str();
  REQUIRE(s.size() == 16 + 8 * 8);
  const auto* b = reinterpret_cast<const unsigned char*>(s.data());
  CHECK((b[0] | b[1] << 8) == 1);
  CHECK((b[2] | b[3] << 8) == 8);
  CHECK((b[4] | b[5] << 8 | b[6] << 16 | b[7] << 24) == 1);
  double v;
  std::memcpy(&v, s.data() + 16, 8);
  CHECK(v == 2.5);
}

TEST_CASE("truncated or malformed binary is rejected") {
  const TorusGrid g(1, 8);
  std::stringstream ss;
  write_binary(ss, Field::constant(g, 1.0));
  std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 3));
  CHECK_THROWS(read_binary(cut));
  s[0] = 7;
  std::stringstream bad(s);
  CHECK_THROWS(read_binary(bad));
}

TEST_CASE("csv columns") {
  const TorusGrid g(1, 8);
  std::stringstream ss;
  write_csv(ss, Field::from_function(g, [](double x, double) { return x; }));
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  CHECK(header == "x,value");
  CHECK(row.rfind("-0.5,-0.5", 0) == 0);

  std::stringstream ts;
  write_csv(ts, TimeField(g, uniform_times(1.0, 2)));
  std::getline(ts, header);
  CHECK(header == "t,x,value");
  int rows = 0;
  while (std::getline(ts, row)) ++rows;
  CHECK(rows == 3 * 8);
}

TEST_CASE("file helpers") {
  const TorusGrid g(1, 16);
  const std::string path = "hmfg_field_io_test.bin";
  save_binary(path, Field::constant(g, 0.25));
  const TimeField back = load_binary(path);
  CHECK(back.frames.cwiseAbs().maxCoeff() == 0.25);
  std::remove(path.c_str());
  CHECK_THROWS(load_binary("does/not/exist.bin"));
}

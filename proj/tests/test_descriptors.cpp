#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "vidfeat/descriptors.hpp"
#include "vidfeat/rng.hpp"

using namespace vidfeat;

namespace {

constexpr float kInvSqrt12 = 0.28867513459481288f;

PixelVolume pixel_volume(const std::function<float(int, int, int)>& f) {
  PixelVolume v;
  v.data.resize(kPixelVolumeSize);
  for (int t = 0; t < kTrajectoryLength; ++t)
    for (int y = 0; y < kPatchSize; ++y)
      for (int x = 0; x < kPatchSize; ++x)
        v.data[x + std::size_t(kPatchSize) * (y + std::size_t(kPatchSize) * t)] = f(x, y, t);
  return v;
}

FlowVolume flow_volume(const std::function<std::pair<float, float>(int, int, int)>& f) {
  FlowVolume v;
  v.data.resize(kFlowVolumeSize);
  for (int t = 0; t < kTrajectoryLength; ++t)
    for (int y = 0; y < kPatchSize; ++y)
      for (int x = 0; x < kPatchSize; ++x) {
        auto [u, w] = f(x, y, t);
        std::size_t i = x + std::size_t(kPatchSize) * (y + std::size_t(kPatchSize) * t);
        v.data[2 * i] = u;
        v.data[2 * i + 1] = w;
      }
  return v;
}

template <std::size_t N>
float l2(const std::array<float, N>& d, int begin = 0, int end = static_cast<int>(N)) {
  double s = 0.0;
  for (int i = begin; i < end; ++i) s += double(d[i]) * d[i];
  return static_cast<float>(std::sqrt(s));
}

}  // namespace

TEST_CASE("descriptor dimensions are fixed by the grid and bin counts") {
  CHECK(kHogDim == 96);
  CHECK(kHofDim == 108);
  CHECK(kMbhDim == 192);
  CHECK(kTrajShapeDim == 28);
}

TEST_CASE("hog") {
  SUBCASE("constant volume gives the zero descriptor") {
    auto d = hog(pixel_volume([](int, int, int) { return 0.5f; }));
    for (float x : d) CHECK(x == 0.0f);
  }

  SUBCASE("a +x ramp puts equal mass in bin 0 of all 12 cells") {
    auto d = hog(pixel_volume([](int x, int, int) { return 0.01f * x; }));
    for (int cell = 0; cell < 12; ++cell)
      for (int bin = 0; bin < 8; ++bin) {
        float expect = bin == 0 ? kInvSqrt12 : 0.0f;
        CHECK(d[cell * 8 + bin] == doctest::Approx(expect).epsilon(1e-4));
      }
  }

  SUBCASE("rotating the ramp 90 degrees moves the hot bin, norm stays 1") {
    auto d = hog(pixel_volume([](int, int y, int) { return 0.01f * y; }));
    for (int cell = 0; cell < 12; ++cell)
      CHECK(d[cell * 8 + 2] == doctest::Approx(kInvSqrt12).epsilon(1e-4));
    CHECK(l2(d) == doctest::Approx(1.0f).epsilon(1e-5));
  }

  SUBCASE("random volumes give unit-norm descriptors") {
    auto rng = make_rng(5, "hog_norm");
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    auto d = hog(pixel_volume([&](int, int, int) { return uni(rng); }));
    CHECK(l2(d) == doctest::Approx(1.0f).epsilon(1e-5));
  }
}

TEST_CASE("hof") {
  SUBCASE("still flow fills exactly the zero bin") {
    auto d = hof(flow_volume([](int, int, int) { return std::pair{0.0f, 0.0f}; }));
    for (int cell = 0; cell < 12; ++cell)
      for (int bin = 0; bin < 9; ++bin) {
        float expect = bin == 8 ? kInvSqrt12 : 0.0f;
        CHECK(d[cell * 9 + bin] == doctest::Approx(expect).epsilon(1e-5));
      }
  }

  SUBCASE("uniform rightward flow fills the 0-degree bin") {
    auto d = hof(flow_volume([](int, int, int) { return std::pair{1.0f, 0.0f}; }));
    for (int cell = 0; cell < 12; ++cell)
      CHECK(d[cell * 9 + 0] == doctest::Approx(kInvSqrt12).epsilon(1e-5));
  }

  SUBCASE("sub-threshold magnitudes count as still") {
    auto slow = hof(flow_volume([](int, int, int) { return std::pair{0.1f, 0.0f}; }));
    auto still = hof(flow_volume([](int, int, int) { return std::pair{0.0f, 0.0f}; }));
    for (int i = 0; i < kHofDim; ++i) CHECK(slow[i] == doctest::Approx(still[i]));
  }

  SUBCASE("threshold is configurable") {
    auto d = hof(flow_volume([](int, int, int) { return std::pair{0.5f, 0.0f}; }), 0.6f);
    for (int cell = 0; cell < 12; ++cell)
      CHECK(d[cell * 9 + 8] == doctest::Approx(kInvSqrt12).epsilon(1e-5));
  }
}

TEST_CASE("mbh") {
  SUBCASE("constant flow suppresses all motion information") {
    auto d = mbh(flow_volume([](int, int, int) { return std::pair{3.0f, -2.0f}; }));
    for (float x : d) CHECK(x == 0.0f);
  }

  SUBCASE("a u-ramp activates MBHx only") {
    auto d = mbh(flow_volume([](int x, int, int) { return std::pair{0.25f * x, 0.0f}; }));
    for (int cell = 0; cell < 12; ++cell)
      for (int bin = 0; bin < 8; ++bin) {
        float expect = bin == 0 ? kInvSqrt12 : 0.0f;
        CHECK(d[cell * 8 + bin] == doctest::Approx(expect).epsilon(1e-4));
      }
    for (int i = 96; i < 192; ++i) CHECK(d[i] == 0.0f);
  }

  SUBCASE("each nonzero half is unit normalized") {
    auto rng = make_rng(8, "mbh_norm");
    std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
    auto d = mbh(flow_volume([&](int, int, int) { return std::pair{uni(rng), uni(rng)}; }));
    CHECK(l2(d, 0, 96) == doctest::Approx(1.0f).epsilon(1e-5));
    CHECK(l2(d, 96, 192) == doctest::Approx(1.0f).epsilon(1e-5));
  }

  SUBCASE("adding a representable global constant changes nothing") {
    auto base = flow_volume([](int x, int y, int) {
      return std::pair{0.25f * (x % 4), -0.5f * (y % 3)};
    });
    auto shifted = base;
    for (std::size_t i = 0; i < shifted.data.size(); i += 2) {
      shifted.data[i] += 2.0f;
      shifted.data[i + 1] -= 1.0f;
    }
    auto d0 = mbh(base);
    auto d1 = mbh(shifted);
    for (int i = 0; i < kMbhDim; ++i) CHECK(d0[i] == d1[i]);
  }
}

TEST_CASE("root_sift") {
  SUBCASE("hand-evaluated pair") {
    auto out = root_sift(std::vector<float>{9.0f, 16.0f});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(0.6f));
    CHECK(out[1] == doctest::Approx(0.8f));
  }
  SUBCASE("zero vector stays zero") {
    auto out = root_sift(std::vector<float>{0.0f, 0.0f, 0.0f});
    for (float x : out) CHECK(x == 0.0f);
  }
  SUBCASE("one-hot is a fixed point") {
    auto out = root_sift(std::vector<float>{0.0f, 1.0f, 0.0f});
    CHECK(out[0] == doctest::Approx(0.0f));
    CHECK(out[1] == doctest::Approx(1.0f));
    CHECK(out[2] == doctest::Approx(0.0f));
  }
}

TEST_CASE("xyt extension appends normalized coordinates") {
  std::vector<float> d = {1.0f, 2.0f};

  SUBCASE("interior location") {
    auto out = xyt_extend(d, {16.0f, 16.0f, 7.0f}, 32, 32, 15);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == 1.0f);
    CHECK(out[1] == 2.0f);
    CHECK(out[2] == doctest::Approx(0.5f));
    CHECK(out[3] == doctest::Approx(0.5f));
    CHECK(out[4] == doctest::Approx(7.0f / 15.0f));
  }

  SUBCASE("origin appends zeros") {
    auto out = xyt_extend(d, {0.0f, 0.0f, 0.0f}, 32, 32, 15);
    CHECK(out[2] == 0.0f);
    CHECK(out[3] == 0.0f);
    CHECK(out[4] == 0.0f);
  }

  SUBCASE("appended values live in [0,1]") {
    auto out = xyt_extend(d, {31.0f, 15.0f, 14.0f}, 32, 32, 15);
    for (int i = 2; i < 5; ++i) {
      CHECK(out[i] >= 0.0f);
      CHECK(out[i] <= 1.0f);
    }
  }
}

TEST_CASE("kind names round trip") {
  for (DescriptorKind k : kAllKinds) {
    auto name = kind_name(k);
    auto back = kind_from_name(name);
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK_FALSE(kind_from_name("nonsense").has_value());
}

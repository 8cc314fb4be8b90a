#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bedsal/dataio.hpp"
#include "bedsal/error.hpp"
#include "bedsal/tensor_file.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bedsal;
using testing::TempDir;

namespace {

dataio::RawDepthImage raw(int w, int h, std::vector<std::uint32_t> values) {
  dataio::RawDepthImage r{w, h, std::move(values), {}};
  r.valid.resize(r.values.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) r.valid[i] = r.values[i] != 0;
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

void touch_png(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  dataio::save_gray8(Image<std::uint8_t>(4, 4, 1, 7), path);
}

}  // namespace

TEST_CASE("normalize_depth maps the valid range onto 0..255") {
  const auto d = dataio::normalize_depth(raw(3, 1, {1, 500, 999}));
  CHECK(d.data()[0] == 0.0);
  CHECK(d.data()[1] == doctest::Approx(127.5));
  CHECK(d.data()[2] == 255.0);

  dataio::RawDepthImage spec_case{3, 1, {0, 500, 1000}, {1, 1, 1}};
  const auto e = dataio::normalize_depth(spec_case);
  CHECK(e.data() == std::vector<double>{0.0, 127.5, 255.0});
}

TEST_CASE("constant depth normalizes to zero and holes go far") {
  const auto d = dataio::normalize_depth(raw(2, 2, {700, 700, 700, 700}));
  for (double v : d.data()) CHECK(v == 0.0);

  const auto holes = dataio::normalize_depth(raw(3, 1, {0, 400, 800}));
  CHECK(holes.data()[0] == 255.0);
  CHECK(holes.data()[1] == 0.0);
  CHECK(holes.data()[2] == 255.0);
}

TEST_CASE("nearest-valid hole filling") {
  dataio::NormalizeOptions opt;
  opt.hole_fill = dataio::HoleFill::NearestValid;
  const auto d = dataio::normalize_depth(raw(4, 1, {400, 0, 0, 800}), opt);
  CHECK(d.data()[0] == 0.0);
  CHECK(d.data()[3] == 255.0);
  CHECK((d.data()[1] == 0.0 || d.data()[1] == 255.0));
}

TEST_CASE("all-invalid depth is NoValidDepth") {
  CHECK(code_of([] { dataio::normalize_depth(raw(2, 1, {0, 0})); }) == ErrorCode::NoValidDepth);
}

TEST_CASE("8-bit depth passes through when requested") {
  dataio::NormalizeOptions opt;
  opt.assume_8bit = true;
  const auto d = dataio::normalize_depth(raw(3, 1, {10, 20, 200}), opt);
  CHECK(d.data() == std::vector<double>{10.0, 20.0, 200.0});
}

TEST_CASE("Kinect-like frame matches a two-pass affine oracle") {
  Rng rng(3);
  auto r = raw(64, 48, std::vector<std::uint32_t>(64 * 48));
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    r.values[i] = static_cast<std::uint32_t>(rng.range(400, 8000));
    r.valid[i] = 1;
  }
  const auto lo = *std::min_element(r.values.begin(), r.values.end());
  const auto hi = *std::max_element(r.values.begin(), r.values.end());
  const auto d = dataio::normalize_depth(r);
  for (std::size_t i = 0; i < r.values.size(); ++i)
    CHECK(d.data()[i] == doctest::Approx(255.0 * (r.values[i] - lo) / double(hi - lo)).epsilon(1e-12));
}

TEST_CASE("normalization stays in range and preserves order") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto r = raw(16, 16, std::vector<std::uint32_t>(256));
    for (auto& v : r.values) v = rng.below(3) == 0 ? 0 : static_cast<std::uint32_t>(rng.range(1, 65535));
    for (std::size_t i = 0; i < r.values.size(); ++i) r.valid[i] = r.values[i] != 0;
    if (std::none_of(r.valid.begin(), r.valid.end(), [](auto v) { return v; })) continue;
    const auto d = dataio::normalize_depth(r);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      REQUIRE(d.data()[i] >= 0.0);
      REQUIRE(d.data()[i] <= 255.0);
      for (std::size_t j = 0; j < r.values.size(); j += 7)
        if (r.valid[i] && r.valid[j] && r.values[i] <= r.values[j]) REQUIRE(d.data()[i] <= d.data()[j]);
    }
  }
}

TEST_CASE("resize_sample") {
  Rng rng(5);
  dataio::Sample s{testing::random_rgb(rng, 324, 324), testing::random_depth(rng, 324, 324), GroundTruth(324, 324)};
  const auto same = dataio::resize_sample(s);
  CHECK(same.rgb == s.rgb);
  CHECK(same.depth == s.depth);
  CHECK(same.gt == s.gt);

  dataio::Sample big{RgbImage(648, 648, 3), DepthImage(648, 648, 1, 42.0), GroundTruth(648, 648)};
  const auto small = dataio::resize_sample(big);
  CHECK(small.depth.width() == 324);
  for (double v : small.depth.data()) REQUIRE(v == 42.0);

  GroundTruth gt(2, 2);
  gt.data() = {0.0, 1.0, 1.0, 0.0};
  dataio::Sample tiny{RgbImage(2, 2, 3), DepthImage(2, 2), gt};
  const auto up = dataio::resize_sample(tiny);
  for (int y = 0; y < 324; ++y)
    for (int x = 0; x < 324; ++x) REQUIRE(up.gt.at(x, y) == gt.at(x / 162, y / 162));
}

TEST_CASE("scan_dataset") {
  TempDir dir("scan");
  SUBCASE("empty root gives an empty index") {
    for (const char* sub : {"rgb", "depth", "gt"}) std::filesystem::create_directories(dir / sub);
    CHECK(dataio::scan_dataset(dir.path(), {}).samples.empty());
  }
  SUBCASE("split counts and determinism") {
    for (int i = 0; i < 10; ++i) {
      const std::string id = "s" + std::to_string(i);
      touch_png(dir / "rgb" / (id + ".png"));
      touch_png(dir / "depth" / (id + ".png"));
      touch_png(dir / "gt" / (id + ".png"));
    }
    const dataio::SplitSpec spec{7, 6, 2, 2};
    const auto index = dataio::scan_dataset(dir.path(), spec);
    REQUIRE(index.samples.size() == 10);
    CHECK(index.split(dataio::Split::Train).size() == 6);
    CHECK(index.split(dataio::Split::Val).size() == 2);
    CHECK(index.split(dataio::Split::Test).size() == 2);
    CHECK(std::is_sorted(index.samples.begin(), index.samples.end(),
                         [](const auto& a, const auto& b) { return a.id < b.id; }));
    CHECK(dataio::format_index(index) == dataio::format_index(dataio::scan_dataset(dir.path(), spec)));
    CHECK(code_of([&] { dataio::scan_dataset(dir.path(), {7, 6, 2, 1}); }) == ErrorCode::ConfigError);
  }
  SUBCASE("missing depth is MissingPair") {
    touch_png(dir / "rgb" / "0001.png");
    touch_png(dir / "gt" / "0001.png");
    std::filesystem::create_directories(dir / "depth");
    try {
      dataio::scan_dataset(dir.path(), {});
      FAIL("expected MissingPair");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingPair);
      CHECK(std::string(e.what()).find("0001") != std::string::npos);
    }
  }
}

TEST_CASE("tensor files round-trip") {
  TempDir dir("tensor");
  std::vector<float> values(4000);
  Rng rng(1);
  for (auto& v : values) v = static_cast<float>(rng.uniform(-1, 1));
  const std::vector<std::uint32_t> dims = {10, 20, 20};
  tensor::write_tensor(dims, values, dir / "a.bstn");
  const auto t = tensor::read_tensor(dir / "a.bstn");
  CHECK(t.dims == dims);
  CHECK(t.dtype == tensor::DType::F32);
  REQUIRE(t.values.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) REQUIRE(static_cast<float>(t.values[i]) == values[i]);

  const std::vector<std::uint32_t> none = {0};
  tensor::write_tensor(none, std::vector<float>{}, dir / "empty.bstn");
  const auto e = tensor::read_tensor(dir / "empty.bstn");
  CHECK(e.dims == none);
  CHECK(e.values.empty());
}

TEST_CASE("random tensors round-trip bit-exactly") {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint32_t> dims(rng.range(1, 4));
    for (auto& d : dims) d = static_cast<std::uint32_t>(rng.range(0, 5));
    std::vector<double> values(tensor::element_count(dims));
    for (auto& v : values) v = rng.uniform(-1e6, 1e6);
    const auto bytes = tensor::encode(dims, std::span<const double>(values));
    const auto t = tensor::decode(bytes);
    REQUIRE(t.dims == dims);
    REQUIRE(std::memcmp(t.values.data(), values.data(), values.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("tensor decode errors") {
  const std::vector<std::uint32_t> dims = {2, 2};
  auto bytes = tensor::encode(dims, std::span<const float>(std::vector<float>{1, 2, 3, 4}));
  auto bad = bytes;
  std::memcpy(bad.data(), "XXXX", 4);
  CHECK(code_of([&] { tensor::decode(bad); }) == ErrorCode::BadMagic);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK(code_of([&] { tensor::decode(cut); }) == ErrorCode::TruncatedPayload);
  CHECK(code_of([&] {
          tensor::encode(dims, std::span<const float>(std::vector<float>{1, 2, 3}));
        }) == ErrorCode::DimMismatch);
}

TEST_CASE("save_saliency quantizes round-half-up") {
  TempDir dir("sal");
  SaliencyMap map(3, 1);
  map.data() = {0.0, 0.5, 1.0};
  dataio::save_saliency(map, dir / "m.png");
  const auto back = dataio::load_saliency(dir / "m.png");
  CHECK(back.data()[0] == 0.0);
  CHECK(back.data()[1] == 128.0 / 255.0);
  CHECK(back.data()[2] == 1.0);
  CHECK(dataio::quantize_unit(0.5) == 128);
  CHECK(dataio::quantize_unit(0.0) == 0);
  CHECK(dataio::quantize_unit(1.0) == 255);
}

TEST_CASE("16-bit depth survives a file round trip") {
  TempDir dir("depth16");
  Image<std::uint16_t> d(5, 3);
  for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] = static_cast<std::uint16_t>(i * 4000);
  dataio::save_gray16(d, dir / "d.png");
  const auto r = dataio::load_raw_depth(dir / "d.png");
  REQUIRE(r.values.size() == d.data().size());
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    CHECK(r.values[i] == d.data()[i]);
    CHECK(static_cast<bool>(r.valid[i]) == (d.data()[i] != 0));
  }
}

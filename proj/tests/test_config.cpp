#include <fstream>
#include <functional>

#include "bedsal/config.hpp"
#include "bedsal/error.hpp"
#include "bedsal/features.hpp"
#include "bedsal/hash.hpp"
#include "bedsal/synth.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bedsal;
using config::Config;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update("a").update("bc");
  CHECK(h.digest() == sha256_hex("abc"));
  Sha256 f1, f2;
  f1.field("ab").field("c");
  f2.field("a").field("bc");
  CHECK(f1.digest() != f2.digest());

  testing::TempDir dir("hash");
  std::ofstream(dir / "x.bin") << "abc";
  CHECK(sha256_file(dir / "x.bin") == sha256_hex("abc"));
}

TEST_CASE("defaults") {
  const Config c;
  CHECK(c.integer("slic.k") == 324);
  CHECK(c.integer("bed.q") == 3);
  CHECK(c.real("eval.beta2") == 0.3);
  CHECK(c.flag("features.bed"));
  CHECK_FALSE(c.flag("features.color"));
  CHECK(c.get("eval.mode") == "best_threshold");
  CHECK(c.values().size() == config::schema().size());
  CHECK(config::architecture(c).channels == 10);
  const auto s = config::schedule(c);
  CHECK(s.stage1.iterations == 50000);
  CHECK(s.stage1.decay_every == 10000);
  CHECK(s.stage2.base_lr == 0.01);
  CHECK(s.batch == 1000);
  CHECK(s.multipliers.depth == 10.0);
  CHECK(s.adadelta.rho == 0.9);
  CHECK(s.adadelta.epsilon == 1e-8);
}

TEST_CASE("validation") {
  Config c;
  CHECK(code_of([&] { c.set("slic.kk", "3"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("bed.q", "0"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("bed.q", "3.5"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("eval.beta2", "0"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("train.rho", "nan"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("eval.mode", "median"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("features.bed", "maybe"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.merge_text("bed.q = 3\nbed.q = 4\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.merge_text("just words\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.merge_file("/nonexistent/bedsal.conf"); }) == ErrorCode::MissingArtifact);
  CHECK(Error(ErrorCode::ConfigError, "x").is_validation());
}

TEST_CASE("parsing and canonical form") {
  Config c;
  c.merge_text("# comment\n  slic.k = 200   # trailing\n\nfeatures.bed = off\neval.beta2=0.090\n");
  CHECK(c.integer("slic.k") == 200);
  CHECK_FALSE(c.flag("features.bed"));
  CHECK(c.get("eval.beta2") == "0.09");
  CHECK(config::architecture(c).channels == 4);
  CHECK(config::eval_options(c).beta2 == 0.09);

  const auto canon = c.canonical();
  CHECK(canon.find("slic.k=200\n") != std::string::npos);
  CHECK(canon.find("bed.q=3\n") < canon.find("slic.k=200\n"));
  CHECK(c.canonical({"slic."}) ==
        "slic.compactness=10\nslic.iters=10\nslic.k=200\nslic.min_size=0\n");

  // Spelling does not change the hash; values do.
  Config a, b;
  a.set("train.epsilon", "1e-8");
  b.set("train.epsilon", "0.00000001");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() == Config().hash());
  b.set("slic.k", "100");
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 64);
}

TEST_CASE("config files") {
  testing::TempDir dir("conf");
  std::ofstream(dir / "a.conf") << "bed.q = 4\nrun.seed = 9\n";
  Config c;
  c.merge_file(dir / "a.conf");
  CHECK(c.integer("bed.q") == 4);
  CHECK(config::architecture(c).channels == 12);
  c.set("bed.q", "2");
  CHECK(c.integer("bed.q") == 2);
}

TEST_CASE("feature files round-trip") {
  testing::TempDir dir("feat");
  synth::write_fixture(dir.path(), 1, 3, 120, 90);
  dataio::Sample sample;
  {
    const auto index = dataio::scan_dataset(dir.path(), {});
    const auto& e = index.samples.at(0);
    sample = {dataio::load_rgb(e.rgb), dataio::normalize_depth(dataio::load_raw_depth(e.depth), {}),
              dataio::load_ground_truth(e.gt)};
    sample = dataio::resize_sample(sample, 80);
  }
  features::Options opt;
  opt.slic.k_target = 40;
  opt.use_color = true;
  const auto f = features::extract(sample, opt);
  features::save(f, dir / "features");
  const auto g = features::load(dir / "features");
  CHECK(g.part.count == f.part.count);
  CHECK(g.part.labels == f.part.labels);
  CHECK(g.targets == f.targets);
  for (int p = 0; p < f.part.count; ++p) REQUIRE(features::stack(g, p, opt).values == features::stack(f, p, opt).values);
  CHECK(code_of([&] { features::load(dir / "nothing"); }) == ErrorCode::MissingArtifact);
}

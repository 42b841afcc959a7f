#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fmala/chain_io.hpp"
#include "fmala/config.hpp"

using namespace fmala;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "fmala_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

ChainRecord sample_record(std::uint64_t seed) {
  const GaussianScoreTarget target(Vector::Zero(3), Matrix(Matrix::Identity(3, 3)));
  ChainSettings s;
  s.kind = SamplerKind::FisherMala;
  s.burn_in = 600;
  s.collection = 300;
  s.init_phase = 200;
  return run_chain(target, s, seed);
}

}  // namespace

TEST_CASE("chain files round-trip bit for bit") {
  const ChainRecord rec = sample_record(12);
  const auto path = temp_dir() / "roundtrip.chain";
  write_chain(path, rec, 0xabcdef12u);
  const LoadedChain loaded = read_chain(path);
  CHECK(loaded.config_hash == 0xabcdef12u);
  CHECK(loaded.record.kind == rec.kind);
  CHECK(loaded.record.seed == rec.seed);
  CHECK(loaded.record.init_phase == rec.init_phase);
  CHECK(loaded.record.burn_in == rec.burn_in);
  CHECK(loaded.record.collection == rec.collection);
  CHECK((loaded.record.samples - rec.samples).norm() == 0.0);
  CHECK(loaded.record.accepted == rec.accepted);
  CHECK(loaded.record.step_trace == rec.step_trace);
  CHECK(loaded.record.seconds == rec.seconds);
  CHECK(chain_digest(loaded.record) == chain_digest(rec));
}

TEST_CASE("chain digest covers payload, not wall clock") {
  const ChainRecord a = sample_record(3);
  ChainRecord b = a;
  for (auto& t : b.seconds) t += 100.0;  // a rerun never reproduces timings
  CHECK(chain_digest(a) == chain_digest(b));
  b.samples(0, 0) += 1e-12;
  CHECK(chain_digest(a) != chain_digest(b));
}

TEST_CASE("rerunning the same seed and settings gives the same digest") {
  CHECK(chain_digest(sample_record(77)) == chain_digest(sample_record(77)));
  CHECK(chain_digest(sample_record(77)) != chain_digest(sample_record(78)));
}

TEST_CASE("corrupt chain files are rejected") {
  const auto path = temp_dir() / "corrupt.chain";
  std::ofstream(path) << "garbage";
  CHECK_THROWS_AS(read_chain(path), std::runtime_error);
  CHECK_THROWS_AS(read_chain(temp_dir() / "missing.chain"), std::runtime_error);
}

TEST_CASE("ini parsing") {
  const Ini ini = Ini::parse(
      "top = 1\n"
      "# comment\n"
      "[alpha]\n"
      "key = value ; trailing comment\n"
      "num = 2.5\n"
      "flag = true\n"
      "list = a, b, c\n");
  CHECK(ini.require_string("top") == "1");
  CHECK(ini.get_string("alpha.key", "") == "value");
  CHECK(ini.get_double("alpha.num", 0.0) == doctest::Approx(2.5));
  CHECK(ini.get_bool("alpha.flag", false));
  CHECK(ini.get_list("alpha.list", {}).size() == 3);
  CHECK(ini.get_long("absent", 9) == 9);
  CHECK_THROWS_AS(ini.require_string("nope"), ConfigError);
  CHECK_THROWS_AS(Ini::parse("novalue\n"), ConfigError);
  CHECK_THROWS_AS(Ini::parse("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("experiment config validation") {
  SUBCASE("minimal gaussian config with defaults") {
    const auto cfg = ExperimentConfig::from_text("experiment = gaussian-sanity\n");
    CHECK(cfg.experiment == ExperimentKind::GaussianSanity);
    CHECK(cfg.samplers.size() == 1);
    CHECK(cfg.lambda == 10.0);
    CHECK(cfg.alpha_star == 0.574);
    CHECK(cfg.hash != 0);
  }
  SUBCASE("unknown keys are rejected with the key name") {
    try {
      ExperimentConfig::from_text("experiment = gaussian-sanity\nwhatever = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("whatever") != std::string::npos);
    }
  }
  SUBCASE("field-level messages") {
    CHECK_THROWS_AS(ExperimentConfig::from_text("experiment = bogus\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text("experiment = heat-source\n[forward]\nfine_factor = 1\n"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text("experiment = gaussian-sanity\n[run]\nburn_in = 0\n"),
                    ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_text("experiment = gaussian-sanity\n[pcn]\nbeta = 2\n"),
        ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_text("experiment = neumann-id\n[forward]\ntheta_truth = 1, 2\n"),
        ConfigError);
  }
  SUBCASE("config hash tracks the text") {
    const auto a = ExperimentConfig::from_text("experiment = gaussian-sanity\nseed = 1\n");
    const auto b = ExperimentConfig::from_text("experiment = gaussian-sanity\nseed = 1\n");
    const auto c = ExperimentConfig::from_text("experiment = gaussian-sanity\nseed = 2\n");
    CHECK(a.hash == b.hash);
    CHECK(a.hash != c.hash);
  }
  SUBCASE("sampler list parses") {
    const auto cfg = ExperimentConfig::from_text(
        "experiment = gaussian-sanity\n[run]\nsamplers = pcn, adamala, fishermala, mala\n");
    CHECK(cfg.samplers.size() == 4);
    CHECK(cfg.samplers[0] == SamplerKind::Pcn);
    CHECK(cfg.samplers[3] == SamplerKind::Mala);
  }
}

#include "mnca/io/checkpoint.hpp"
#include "mnca/io/config.hpp"
#include "mnca/io/csv.hpp"
#include "mnca/io/image.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace mnca;
namespace fs = std::filesystem;

namespace {

std::string preset(const std::string& name) { return std::string(MNCA_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mnca_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

Checkpoint sample_checkpoint() {
  ModelShape s;
  s.variant = Variant::MncaNoise;
  s.channels = 6;
  s.hidden = 9;
  s.rules = 3;
  return {Model<float>::initialize(s, RngStream(3)), nlohmann::json{{"note", "x"}}, 42, 7};
}

}  // namespace

TEST_SUITE("cli-io") {

TEST_CASE("presets parse") {
  for (const char* f : {"tissue.yaml", "emoji.yaml", "microscopy.yaml", "minimal.yaml", "abc.yaml"}) {
    CAPTURE(f);
    CHECK_NOTHROW(parse_config(preset(f)));
  }
  const auto t = parse_config(preset("tissue.yaml"));
  CHECK(t.model.variant == Variant::Mnca);
  CHECK(t.model.channels == 6);
  CHECK(t.model.hidden == 128);
  CHECK(t.model.rules == 5);
  CHECK_FALSE(t.model.residual);
  CHECK(t.learning_rate == 1e-3);
  CHECK(t.epochs == 800);
  CHECK(t.milestones == std::vector<int>{500});
  CHECK(t.gamma == 0.1);
  CHECK(t.task == Task::Tissue);
}

TEST_CASE("config errors") {
  try {
    parse_config_text("variant: nca\nchannels: 6\nhiden_dim: 4\n", "x.yaml");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x.yaml:3") != std::string::npos);
    CHECK(msg.find("hiden_dim") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("tissue:\n  sise: 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("gamma: 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("variant: gca\nrules: 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dropout: 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("channels: [1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(preset("missing.yaml")), ConfigError);
}

TEST_CASE("config hash") {
  const auto a = parse_config_text("variant: mnca\nrules: 3\nchannels: 6\n");
  const auto b = parse_config_text("channels: 6\nrules: 3\nvariant: mnca\n");
  const auto c = parse_config_text("variant: mnca\nrules: 4\nchannels: 6\n");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  CHECK(parse_config_text(config_to_json(a).dump()).model.rules == 3);
}

TEST_CASE("checkpoint round trip") {
  const auto path = scratch("ck.json").string();
  const auto ck = sample_checkpoint();
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.training_steps == 42);
  CHECK(back.seed == 7);
  CHECK(back.config == ck.config);
  std::vector<const Mat<float>*> want;
  ck.model.visit([&](const std::string&, const Mat<float>& m) { want.push_back(&m); });
  std::size_t i = 0;
  back.model.visit([&](const std::string&, const Mat<float>& m) { CHECK(m == *want[i++]); });
  CHECK(i == want.size());

  const auto path2 = scratch("ck2.json").string();
  save_checkpoint(path2, back);
  CHECK(slurp(path) == slurp(path2));
  CHECK(slurp(path + ".bin") == slurp(path2 + ".bin"));
  CHECK(slurp(path + ".bin").size() == 4 * ck.model.parameter_count());

  auto target = Model<float>::zeros(ck.model.shape);
  CHECK_NOTHROW(load_checkpoint(path, target));
  ModelShape other = ck.model.shape;
  other.hidden = 10;
  auto wrong = Model<float>::zeros(other);
  try {
    load_checkpoint(path, wrong);
    FAIL("expected inventory error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrc::Inventory);
  }
}

TEST_CASE("checkpoint failures") {
  const auto path = scratch("bad.json").string();
  save_checkpoint(path, sample_checkpoint());
  const std::string manifest = slurp(path), blob = slurp(path + ".bin");
  auto code_of = [&] {
    try {
      load_checkpoint(path);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    return CheckpointErrc{};
  };

  dump(path + ".bin", blob.substr(0, blob.size() - 4));
  CHECK(code_of() == CheckpointErrc::Length);
  dump(path + ".bin", blob);

  auto j = nlohmann::json::parse(manifest);
  j["version"] = 2;
  dump(path, j.dump());
  CHECK(code_of() == CheckpointErrc::Version);

  dump(path, manifest.substr(0, manifest.size() / 2));
  CHECK(code_of() == CheckpointErrc::Corrupt);

  j = nlohmann::json::parse(manifest);
  j["parameters"][0]["rows"] = 3;
  dump(path, j.dump());
  CHECK(code_of() == CheckpointErrc::Inventory);

  fs::remove(path + ".bin");
  dump(path, manifest);
  CHECK(code_of() == CheckpointErrc::Io);
}

TEST_CASE("image ingestion") {
  Image8 rgb;
  rgb.width = rgb.height = 20;
  rgb.channels = 3;
  for (int i = 0; i < 20 * 20; ++i) {
    rgb.pixels.push_back(static_cast<std::uint8_t>(i % 256));
    rgb.pixels.push_back(255);
    rgb.pixels.push_back(0);
  }
  const auto path = scratch("rgb.png").string();
  write_png(path, rgb);
  const auto g = ingest_image(path, 40, 6);
  CHECK(g.channels() == 4);
  CHECK(g.height == 52);
  CHECK(g.width == 52);
  CHECK(g.at(3, 6, 6) == 1.0f);
  CHECK(g.at(1, 30, 30) == 1.0f);
  CHECK(g.at(3, 0, 0) == 0.0f);
  CHECK(g.at(3, 51, 51) == 0.0f);
  CHECK(g.at(0, 6, 6) == 0.0f);
  CHECK(g.at(0, 6, 8) == doctest::Approx(1.0f / 255.0f));

  // writing the grid back and reading it again is a fixed point
  const auto path2 = scratch("again.png").string();
  write_png(path2, render_rgba(g));
  const auto g2 = ingest_image(path2, 0, 0);
  CHECK(g2.data == g.data);
  CHECK_THROWS(ingest_image(scratch("nope.png").string(), 40, 6));
}

TEST_CASE("csv") {
  CHECK(CsvWriter::format(0.1) == "0.10000000000000001");
  CHECK(CsvWriter::format(2.0) == "2");
  const auto path = scratch("t.csv").string();
  {
    CsvWriter w(path, {"a", "b", "c"});
    w.row({std::string("x"), 3LL, 0.5});
    CHECK_THROWS(w.row({1LL}));
    w.close();
  }
  CHECK(slurp(path) == "a,b,c\nx,3,0.5\n");
  const auto rows = read_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][2] == "0.5");
}

}  // TEST_SUITE

#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dld/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(DLD_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dld_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Every regular file under root except run summaries, keyed by relative path.
std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel.rfind("summaries/", 0) == 0) continue;
    out[rel] = dld::read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("help and usage errors") {
  const auto top = cli("--help");
  CHECK(top.code == 0);
  for (const char* cmd : {"dc", "flow", "trace", "sweep", "split", "train", "evaluate", "predict", "validate-davis"}) {
    CAPTURE(cmd);
    CHECK(top.output.find(cmd) != std::string::npos);
    const auto sub = cli(std::string(cmd) + " --help");
    CHECK(sub.code == 0);
    CHECK(sub.output.find("--output") != std::string::npos);
    CHECK(sub.output.find("Exit codes") != std::string::npos);
  }
  CHECK(cli("dc --bogus 3").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("").code != 0);
}

TEST_CASE("dc by formula") {
  const auto out = fresh("dc");
  const auto davis = cli("--output " + out.string() + " dc --g 45 --n 48 --method davis");
  CHECK(davis.code == 0);
  CHECK(davis.output == "9.825 um\n");
  const auto inglis = cli("-q --output " + out.string() + " dc --n 12 --method inglis");
  CHECK(inglis.output == "15.000 um\n");
  CHECK(fs::exists(out / "summaries" / "dc.json"));
  const auto summary = nlohmann::json::parse(dld::read_file(out / "summaries" / "dc.json"));
  CHECK(summary.at("command") == "dc");
  CHECK(summary.contains("wall_seconds"));
  CHECK(cli("--output " + out.string() + " dc --n 0").code == 2);
}

TEST_CASE("exit codes by failure category") {
  const auto out = fresh("codes");
  dld::write_file(out / "bad.toml", "[solver]\nspeed = 3\n");
  CHECK(cli("--config " + (out / "bad.toml").string() + " --output " + out.string() + " dc").code == 2);

  dld::write_file(out / "stiff.toml", "[solver]\nreynolds = 5.0\nmax_iterations = 1\ntolerance = 1e-300\n");
  CHECK(cli("--config " + (out / "stiff.toml").string() + " --output " + out.string() + " flow --n 6").code == 3);

  CHECK(cli("--output " + (out / "empty").string() + " split").code == 4);

  dld::write_file(out / "model.json", "{\"format\": \"dld-model\", \"version\": 9}");
  CHECK(cli("--output " + out.string() + " predict --model knn_clf --model-file " + (out / "model.json").string() +
            " --size 3 --n 6")
            .code == 5);
}

TEST_CASE("small pipeline is reproducible byte for byte") {
  const std::string sweep = " sweep --periods 6 --sizes 2,3,4,5,6,7,8,30,31,32,33,34,35,36";
  const std::string steps[] = {sweep, " split --ratio 0.3", " train --model knn_reg --no-search",
                               " train --model knn_clf --no-search", " evaluate --model knn_reg",
                               " evaluate --model knn_clf"};
  std::map<std::string, std::string> first;
  for (const char* name : {"a", "b"}) {
    const auto root = fresh(std::string("repro_") + name);
    for (const auto& step : steps) {
      const auto r = cli("-q --seed 3 --output " + root.string() + step);
      INFO(step << "\n" << r.output);
      REQUIRE(r.code == 0);
    }
    auto files = artifacts(root);
    CHECK(files.count("dataset/regression.csv") == 1);
    CHECK(files.count("split.json") == 1);
    CHECK(files.count("models/knn_clf.json") == 1);
    CHECK(files.count("reports/knn_clf.json") == 1);
    CHECK(files.count("reports/knn_clf_confusion.csv") == 1);
    CHECK(files.count("plots/knn_clf_confusion.svg") == 1);
    CHECK(fs::exists(root / "summaries" / "sweep.json"));
    if (first.empty()) {
      first = std::move(files);
    } else {
      CHECK(files.size() == first.size());
      for (const auto& [path, bytes] : first) {
        CAPTURE(path);
        CHECK(files[path] == bytes);
      }
    }
  }
  const auto root = fs::temp_directory_path() / "dld_test_cli_repro_a";
  const auto pred = cli("-q --output " + root.string() + " predict --model knn_clf --size 33 --n 6");
  CHECK(pred.code == 0);
  CHECK(pred.output.find("bumped") != std::string::npos);
}

#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "memfl/cli.hpp"
#include "support.hpp"

using namespace memfl;
using namespace memfl::testing;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, std::map<std::string, std::string> vars = {}) {
  args.insert(args.begin(), "memfl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const EnvLookup env = [vars](const std::string& k) -> std::optional<std::string> {
    const auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
  Run r;
  r.code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err, env);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string mini_arg() { return mini_dir().string(); }
std::string script_arg() { return (mini_dir() / "script.json").string(); }
std::string memory_arg() { return (mini_dir() / "memory.json").string(); }

/// Counts every request; never answers successfully.
struct CountingServer {
  httplib::Server server;
  std::thread thread;
  std::atomic<int> hits{0};
  int port = 0;

  CountingServer() {
    server.Post(".*", [this](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 400;
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~CountingServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("index succeeds and reports the snapshot") {
  const auto dir = scratch_dir("cli-index");
  const auto r = run({"index", "--project", mini_arg(), "--out", (dir / "snap.json").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("8 classes, 44 methods, 10 bugs") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "snap.json"));
}

TEST_CASE("argument errors exit 1 with usage") {
  const auto r = run({"index", "--project", mini_arg(), "--bogus"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("error[ValidationError]") != std::string::npos);
  CHECK(r.err.find("--project") != std::string::npos);
  CHECK(run({}).code == kExitValidation);
  CHECK(run({"localize"}).code == kExitValidation);
  CHECK(run({"eval", "--project", mini_arg(), "--folds", "1"}).code == kExitValidation);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("unknown bug exits 1") {
  const auto r = run({"localize", "--project", mini_arg(), "--provider", "scripted", "--script", script_arg(),
                      "--memory", memory_arg(), "--bug", "Mini-99", "--out", scratch_dir("cli-nobug").string()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("error[NotFound]") != std::string::npos);
}

TEST_CASE("record, replay, and a tampered cassette") {
  const auto dir = scratch_dir("cli-replay");
  const auto cassette = (dir / "c.jsonl").string();
  const auto rec = run({"localize", "--project", mini_arg(), "--provider", "scripted", "--script", script_arg(),
                        "--memory", memory_arg(), "--bug", "Mini-1,Mini-4", "--record", cassette, "--out",
                        (dir / "a").string()});
  REQUIRE(rec.code == kExitOk);
  const auto rep = run({"localize", "--project", mini_arg(), "--provider", "replay", "--cassette", cassette,
                        "--memory", memory_arg(), "--bug", "Mini-1,Mini-4", "--out", (dir / "b").string()});
  CHECK(rep.code == kExitOk);
  CHECK(rep.out == rec.out);
  CHECK(read_file(dir / "a" / "Mini-4.json") == read_file(dir / "b" / "Mini-4.json"));

  // Corrupt the hash of one entry: its request can no longer be found.
  std::string tampered, victim;
  for (const auto& line : split_lines(read_file(cassette))) {
    auto j = nlohmann::json::parse(line);
    if (victim.empty() && j.at("tag").get<std::string>().find("/confirm/") != std::string::npos) {
      victim = j.at("tag");
      j["prompt_hash"] = std::string(64, '0');
    }
    tampered += j.dump() + "\n";
  }
  REQUIRE_FALSE(victim.empty());
  std::ofstream(dir / "t.jsonl", std::ios::binary) << tampered;
  const auto bad = run({"localize", "--project", mini_arg(), "--provider", "replay", "--cassette",
                        (dir / "t.jsonl").string(), "--memory", memory_arg(), "--bug", "Mini-1,Mini-4", "--out",
                        (dir / "c").string()});
  CHECK(bad.code == kExitProvider);
  CHECK(bad.err.find("error[CassetteMiss]") != std::string::npos);
  CHECK(bad.err.find(victim) != std::string::npos);
}

TEST_CASE("dry run prints prompts without contacting the provider") {
  CountingServer server;
  const auto dir = scratch_dir("cli-dry");
  const std::map<std::string, std::string> env{
      {"MEMFL_API_KEY", "k"}, {"MEMFL_BASE_URL", "http://127.0.0.1:" + std::to_string(server.port) + "/v1"}};
  const auto r = run({"localize", "--project", mini_arg(), "--provider", "live", "--memory", memory_arg(), "--bug",
                      "Mini-2", "--dry-run", "--out", (dir / "out").string()},
                     env);
  CHECK(r.code == kExitOk);
  CHECK(server.hits == 0);
  CHECK(r.out.find("===== loc/review/Mini-2 (") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out"));

  // The same command for real does reach the server.
  const auto live = run({"localize", "--project", mini_arg(), "--provider", "live", "--memory", memory_arg(),
                         "--bug", "Mini-2", "--out", (dir / "out").string()},
                        env);
  CHECK(live.code == kExitProvider);
  CHECK(server.hits == 1);
}

TEST_CASE("live provider without a key exits 2") {
  const auto r = run({"localize", "--project", mini_arg(), "--provider", "live", "--memory", memory_arg(),
                      "--bug", "Mini-2", "--out", scratch_dir("cli-nokey").string()});
  CHECK(r.code == kExitProvider);
  CHECK(r.err.find("MEMFL_API_KEY") != std::string::npos);
}

TEST_CASE("degraded results exit 3") {
  const auto dir = scratch_dir("cli-degraded");
  std::ofstream(dir / "s.json") << R"({"rules": [{"match": ".*", "reply": "no idea", "sticky": true}]})";
  const auto r = run({"localize", "--project", mini_arg(), "--provider", "scripted", "--script",
                      (dir / "s.json").string(), "--memory", memory_arg(), "--bug", "Mini-5", "--out",
                      (dir / "out").string()});
  CHECK(r.code == kExitDegraded);
  CHECK(r.out.find("Mini-5 (degraded)") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "out" / "Mini-5.json"));
}

TEST_CASE("summarize reproduces the fixture memory") {
  const auto dir = scratch_dir("cli-summarize");
  const auto r = run({"summarize", "--project", mini_arg(), "--provider", "scripted", "--script", script_arg(),
                      "--memory", (dir / "memory.json").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("with 9 provider calls") != std::string::npos);
  CHECK(load_memory(dir / "memory.json") == mini().memory);
  // A second run finds every summary cached.
  const auto again = run({"summarize", "--project", mini_arg(), "--provider", "scripted", "--script",
                          script_arg(), "--memory", (dir / "memory.json").string()});
  CHECK(again.out.find("with 0 provider calls") != std::string::npos);
}

TEST_CASE("eval replays the committed cassette") {
  const auto dir = scratch_dir("cli-eval");
  const auto r = run({"eval", "--project", mini_arg(), "--memory", memory_arg(), "--out", dir.string()});
  REQUIRE(r.code == kExitOk);
  const auto acc = read_file(dir / "acc.csv");
  CHECK(acc.find("\nmini,10,8,9,9,7,8,8\n") != std::string::npos);
  for (const char* f : {"acc.txt", "acc_by_model.csv", "cost.csv", "overlap.json", "summary.json"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
}

TEST_CASE("report renders the reference tables") {
  const auto dir = scratch_dir("cli-report");
  const auto r = run({"report", "--reference", (data_dir() / "reference_results.json").string(), "--out",
                      dir.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(read_file(dir / "acc.csv") == read_file(golden_dir() / "reference/acc.csv"));
}

}  // TEST_SUITE

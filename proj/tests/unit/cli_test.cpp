#include <gtest/gtest.h>

#include <chrono>
#include <csignal>
#include <fcntl.h>
#include <fstream>
#include <regex>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace starcube::testing;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

// Runs the CLI with stdout/stderr captured to files under `dir`.
Result starcube(const fs::path& dir, const std::vector<std::string>& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  pid_t pid = fork();
  if (pid == 0) {
    int o = open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int e = open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    dup2(o, 1);
    dup2(e, 2);
    std::vector<char*> argv{const_cast<char*>(STARCUBE_CLI)};
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(STARCUBE_CLI, argv.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

class Cli : public ::testing::Test {
 protected:
  TempDir tmp{"starcube-cli"};
  fs::path wh() const { return tmp.path() / "wh"; }
  fs::path src() const { return tmp.path() / "src"; }
  std::string pipeline() const { return std::string(STARCUBE_SOURCE_DIR) + "/data/cancer/pipeline.json"; }

  Result run(std::vector<std::string> args) {
    args.insert(args.begin(), {"--data-dir", wh().string()});
    return starcube(tmp.path(), args);
  }
  void gen(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"gen-data", "--out", out.string(), "--patients", "120", "--facts", "900"};
    args.insert(args.end(), extra.begin(), extra.end());
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  Result etl(const fs::path& source, const std::string& extra_flag = "") {
    std::vector<std::string> args{"etl", "--pipeline", pipeline(), "--source-dir", source.string(),
                                  "--batch-date", "2013-01-15"};
    if (!extra_flag.empty()) args.push_back(extra_flag);
    return run(args);
  }
};

TEST_F(Cli, GenDataIsDeterministic) {
  gen(tmp.path() / "a");
  gen(tmp.path() / "b");
  for (const char* f : {"patients.csv", "procedures.csv", "treatments.csv", "facts.csv", "manifest.json"}) {
    ASSERT_TRUE(fs::exists(tmp.path() / "a" / f)) << f;
    EXPECT_EQ(read_text(tmp.path() / "a" / f), read_text(tmp.path() / "b" / f)) << f;
  }
  gen(tmp.path() / "c", {"--seed", "7"});
  EXPECT_NE(read_text(tmp.path() / "a" / "facts.csv"), read_text(tmp.path() / "c" / "facts.csv"));
}

TEST_F(Cli, ZeroTypoRateListsNoTypos) {
  gen(src(), {"--typo-rate", "0"});
  auto manifest = nlohmann::json::parse(read_text(src() / "manifest.json"));
  EXPECT_TRUE(manifest["typos"].empty());
}

TEST_F(Cli, GoldenPath) {
  gen(src());
  auto manifest = nlohmann::json::parse(read_text(src() / "manifest.json"));

  auto r = run({"init"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = etl(src());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(wh() / "quarantine" / "batch-1.csv"));
  auto report = nlohmann::json::parse(read_text(wh() / "quarantine" / "batch-1.report.json"));
  EXPECT_EQ(report["batch_id"], "batch-1");

  r = run({"build"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cube Cancer"), std::string::npos) << r.out;

  r = run({"query", "--format", "csv", "SELECT [Measures].[Cost] ON COLUMNS FROM [Cancer]"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv_text(r.out);
  ASSERT_EQ(rows.size(), 2u) << r.out;
  ASSERT_EQ(rows[1].size(), 1u);
  EXPECT_EQ(parse_fixed4(rows[1][0]), parse_fixed4(manifest["expected"]["total_cost"].get<std::string>()));
}

TEST_F(Cli, EtlRerunKeepsTableHashes) {
  gen(src());
  ASSERT_EQ(run({"init"}).code, 0);
  ASSERT_EQ(etl(src()).code, 0);
  auto hashes = [&] {
    auto doc = nlohmann::json::parse(read_text(wh() / "warehouse.json"));
    nlohmann::json out;
    for (auto& [k, v] : doc["tables"].items()) out[k] = v["hash"];
    return out;
  };
  auto first = hashes();
  ASSERT_FALSE(first.empty());
  ASSERT_EQ(etl(src()).code, 0);
  EXPECT_EQ(first, hashes());
}

TEST_F(Cli, InitIsIdempotentAndRefusesOtherCatalogs) {
  ASSERT_EQ(run({"init"}).code, 0);
  auto r = run({"init"});
  EXPECT_EQ(r.code, 0) << r.err;

  auto doc = nlohmann::json::parse(read_text(fs::path(STARCUBE_SOURCE_DIR) / "data/cancer/catalog.json"));
  doc["cubes"][0]["name"] = "OtherCube";
  const fs::path other = tmp.path() / "other.json";
  std::ofstream(other) << doc.dump(2);
  r = run({"init", "--catalog", other.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("OtherCube"), std::string::npos) << r.err;
}

TEST_F(Cli, InvalidCatalogIsAUserError) {
  const fs::path bad = tmp.path() / "bad.json";
  std::ofstream(bad) << R"({"dimensions": [], "facts": [], "cubes": [{"name": "C", "fact": "Nope"}]})";
  EXPECT_EQ(run({"init", "--catalog", bad.string()}).code, 2);
}

TEST_F(Cli, EtlBeforeInit) {
  gen(src());
  auto r = etl(src());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("NotInitialized"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingSourceIsAnEnvironmentError) {
  ASSERT_EQ(run({"init"}).code, 0);
  auto r = etl(tmp.path() / "nowhere");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("SourceNotFound"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingMeasureColumnIsFatal) {
  gen(src());
  // The fact load maps cost somewhere the Cost measure does not look.
  auto doc = nlohmann::json::parse(read_text(pipeline()));
  auto& fact_load = doc["loads"].back();
  fact_load["transforms"][0]["map"]["cost"] = "charge";
  fact_load["transforms"][1]["types"].erase("Cost");
  const fs::path edited = tmp.path() / "pipeline.json";
  std::ofstream(edited) << doc.dump(2);

  ASSERT_EQ(run({"init"}).code, 0);
  auto r = run({"etl", "--pipeline", edited.string(), "--source-dir", src().string()});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("UnknownMeasureColumn"), std::string::npos) << r.err;
}

TEST_F(Cli, BadBatchDate) {
  gen(src());
  ASSERT_EQ(run({"init"}).code, 0);
  auto r = run({"etl", "--pipeline", pipeline(), "--source-dir", src().string(), "--batch-date", "15/01/2013"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, QuerySyntaxErrorPointsAtTheColumn) {
  ASSERT_EQ(run({"init"}).code, 0);
  auto r = run({"query", "SELECT [Measures].[Cost] ON COLUMNZ FROM [Cancer]"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("column 29"), std::string::npos) << r.err;
  const auto caret = r.err.find('^');
  ASSERT_NE(caret, std::string::npos) << r.err;
  const auto line_start = r.err.rfind('\n', caret) + 1;
  EXPECT_EQ(caret - line_start, 2u + 28u) << r.err;
}

TEST_F(Cli, QueryErrors) {
  ASSERT_EQ(run({"init"}).code, 0);
  EXPECT_EQ(run({"query", "SELECT [Measures].[Cost] ON COLUMNS FROM [Nope]"}).code, 2);
  EXPECT_EQ(run({"query", "SELECT [Measures].[Nope] ON COLUMNS FROM [Cancer]"}).code, 2);
  EXPECT_EQ(run({"query", "--format", "xml", "SELECT [Measures].[Cost] ON COLUMNS FROM [Cancer]"}).code, 2);
  EXPECT_EQ(run({"query"}).code, 2);
}

TEST_F(Cli, BuildEmptyWarehouseAndUnknownCube) {
  ASSERT_EQ(run({"init"}).code, 0);
  auto r = run({"build"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0 facts, 0 base cells"), std::string::npos) << r.out;
  EXPECT_EQ(run({"build", "NoSuchCube"}).code, 2);
}

TEST_F(Cli, QueryFormats) {
  gen(src());
  ASSERT_EQ(run({"init"}).code, 0);
  ASSERT_EQ(etl(src()).code, 0);
  const std::string q = "SELECT [Measures].[Cost] ON COLUMNS, [PaID].[Gender].Members ON ROWS FROM [Cancer]";
  auto json = run({"query", "--format", "json", q});
  ASSERT_EQ(json.code, 0) << json.err;
  EXPECT_TRUE(nlohmann::json::accept(json.out)) << json.out;
  auto table = run({"query", q});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("Cost"), std::string::npos);

  const fs::path file = tmp.path() / "q.mdx";
  std::ofstream(file) << q;
  auto from_file = run({"query", "--format", "json", "--file", file.string()});
  EXPECT_EQ(from_file.out, json.out);
}

TEST_F(Cli, UnknownSubcommandAndMissingFlags) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"etl"}).code, 2);
  EXPECT_EQ(starcube(tmp.path(), {"--help"}).code, 0);
}

TEST_F(Cli, DataDirFromEnvironment) {
  const fs::path env_dir = tmp.path() / "from-env";
  setenv("STARCUBE_DATA_DIR", env_dir.c_str(), 1);
  auto r = starcube(tmp.path(), {"init"});
  unsetenv("STARCUBE_DATA_DIR");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_dir / "warehouse.json"));
}

TEST_F(Cli, ShippedDataMatchesTheBuiltInDefaults) {
  const fs::path shipped = fs::path(STARCUBE_SOURCE_DIR) / "data/cancer";
  EXPECT_EQ(starcube::schema::load_catalog_file(shipped / "catalog.json"), starcube::schema::reference_schema());
  EXPECT_EQ(nlohmann::json::parse(starcube::etl::serialize_pipeline(
                starcube::etl::load_pipeline_file(shipped / "pipeline.json"))),
            nlohmann::json::parse(starcube::etl::serialize_pipeline(starcube::etl::reference_pipeline())));
  ASSERT_EQ(run({"gen-data", "--out", src().string()}).code, 0);
  for (const char* f : {"patients.csv", "procedures.csv", "treatments.csv", "facts.csv", "manifest.json"}) {
    EXPECT_EQ(read_text(shipped / f), read_text(src() / f)) << f;
  }
}

// serve runs in a child we keep the pid of.
class Server {
 public:
  Server(const fs::path& data_dir, const fs::path& log, int port) : log_(log) {
    pid_ = fork();
    if (pid_ == 0) {
      int fd = open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      dup2(fd, 2);
      dup2(fd, 1);
      const std::string p = std::to_string(port);
      execl(STARCUBE_CLI, STARCUBE_CLI, "--data-dir", data_dir.c_str(), "serve", "--host", "127.0.0.1",
            "--port", p.c_str(), "--poll-ms", "100", static_cast<char*>(nullptr));
      _exit(127);
    }
  }
  ~Server() {
    if (pid_ > 0 && !reaped_) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
  }

  // Waits for a log line matching `pattern`; returns its first capture.
  std::optional<std::string> wait_for(const std::string& pattern) {
    const std::regex re(pattern);
    for (int i = 0; i < 200; ++i) {
      std::smatch m;
      const std::string text = fs::exists(log_) ? read_text(log_) : "";
      if (std::regex_search(text, m, re)) return m.size() > 1 ? m[1].str() : m[0].str();
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    return std::nullopt;
  }

  int interrupt() {
    kill(pid_, SIGINT);
    int status = 0;
    waitpid(pid_, &status, 0);
    reaped_ = true;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string log() const { return read_text(log_); }

 private:
  fs::path log_;
  pid_t pid_ = -1;
  bool reaped_ = false;
};

TEST_F(Cli, ServeHealthPortInUseAndSigint) {
  gen(src());
  ASSERT_EQ(run({"init"}).code, 0);
  ASSERT_EQ(etl(src()).code, 0);

  Server server(wh(), tmp.path() / "serve.log", 0);
  auto port_text = server.wait_for(R"(listening on 127\.0\.0\.1:(\d+))");
  ASSERT_TRUE(port_text) << server.log();
  ASSERT_TRUE(server.wait_for("published warehouse version")) << server.log();
  const int port = std::stoi(*port_text);

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto q = client.Post("/api/query",
                       R"({"mdx": "SELECT [Measures].[Cost] ON COLUMNS FROM [Cancer]", "format": "csv"})",
                       "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  auto cli = run({"query", "--format", "csv", "SELECT [Measures].[Cost] ON COLUMNS FROM [Cancer]"});
  EXPECT_EQ(q->body, cli.out);

  auto clash = starcube(tmp.path(), {"--data-dir", wh().string(), "serve", "--host", "127.0.0.1", "--port",
                                     std::to_string(port)});
  EXPECT_EQ(clash.code, 3) << clash.err;

  EXPECT_EQ(server.interrupt(), 0) << server.log();
  EXPECT_NE(server.log().find("stopped"), std::string::npos);
}

TEST_F(Cli, ServeWithoutWarehouseReportsUnavailable) {
  Server server(wh(), tmp.path() / "serve.log", 0);
  auto port_text = server.wait_for(R"(listening on 127\.0\.0\.1:(\d+))");
  ASSERT_TRUE(port_text) << server.log();
  httplib::Client client("127.0.0.1", std::stoi(*port_text));
  auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 503);
  EXPECT_EQ(server.interrupt(), 0);
}

}  // namespace

#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "manifest.hpp"
#include "rugbayes/csv.hpp"

namespace fs = std::filesystem;
using rugbayes::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Scratch directory with a small simulated season.
struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("rugbayes_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto r = cli({"simulate", "--teams", "4", "--rounds", "6", "--seed", "5", "--out-dir", (dir / "sim").string()});
    REQUIRE(r.code == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
  std::string data() const { return p("sim/matches.csv"); }
  std::string prev() const { return p("sim/prev.csv"); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

std::vector<std::string> fit_args(const std::string& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> a{"fit", "--data", ws().data(), "--prev", ws().prev(), "--iters", "300", "--warmup", "150", "--out", out};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

}  // namespace

TEST_CASE("simulate writes the match schema, prev table and truth") {
  const auto header = lines(ws().data()).front();
  CHECK(header.starts_with("round,home_team,away_team"));
  CHECK(header.ends_with(",y_raw"));
  CHECK(lines(ws().data()).size() == 13);
  CHECK(lines(ws().prev()).front() == "team,scored,received");
  const auto truth = nlohmann::json::parse(slurp(ws().p("sim/truth.json")));
  CHECK(truth.at("config").at("seed") == 5);
  CHECK(fs::exists(ws().p("sim/manifest.json")));
}

TEST_CASE("fit stores (iters - warmup) draws per chain") {
  const auto r = cli({"fit", "--data", ws().data(), "--prev", ws().prev(), "--model", "II", "--chains", "4", "--iters", "2500", "--warmup",
                      "1500", "--seed", "7", "--out", ws().p("draws.csv")});
  REQUIRE(r.code == 0);
  const auto rows = lines(ws().p("draws.csv"));
  CHECK(rows.size() == 4001);
  CHECK(rows.front().starts_with("chain,iter,b_home,b_prev,b_effort,b_atten,nu,sigma_y"));
  CHECK(rows.back().starts_with("4,1000,"));

  const auto m = nlohmann::json::parse(slurp(ws().p("draws.csv.manifest.json")));
  CHECK(m.at("command") == "fit");
  CHECK(m.at("seed") == 7);
  CHECK(m.at("config").at("model") == "II");
  CHECK(m.at("inputs").size() == 2);
  CHECK(m.at("inputs")[0].at("sha256") == rugbayes::cli::file_sha256(ws().data()));
  CHECK(m.at("outputs")[0].at("sha256") == rugbayes::cli::file_sha256(ws().p("draws.csv")));
  CHECK(m.at("config_hash").get<std::string>().size() == 64);
  CHECK(m.contains("wall_clock_seconds"));
  CHECK(m.contains("engine_version"));

  const auto s = cli({"summarize", "--draws", ws().p("draws.csv"), "--out", ws().p("summary.csv")});
  REQUIRE(s.code == 0);
  const auto sum = lines(ws().p("summary.csv"));
  CHECK(sum.front() == "param,rhat,n_eff,mean,sd,q025,q500,q975");
  REQUIRE(sum.size() == 7);
  for (std::size_t i = 1; i < sum.size(); ++i) {
    const auto cells = rugbayes::csv::split_line(sum[i]);
    double rhat = 0.0;
    REQUIRE(rugbayes::csv::parse_double(cells[1], rhat));
    CHECK(rhat < 1.01);
  }
  CHECK(fs::exists(ws().p("summary.csv.manifest.json")));
}

TEST_CASE("model I has no attendance column") {
  REQUIRE(cli(fit_args(ws().p("m1.csv"), {"--model", "I"})).code == 0);
  const auto header = lines(ws().p("m1.csv")).front();
  CHECK(header.find("b_atten") == std::string::npos);
  CHECK(header.find("b_day") == std::string::npos);
  REQUIRE(cli(fit_args(ws().p("m3.csv"), {"--model", "III", "--no-abilities"})).code == 0);
  const auto h3 = lines(ws().p("m3.csv")).front();
  CHECK(h3.find("b_day") != std::string::npos);
  CHECK(h3.find(",\"a[") == std::string::npos);
  CHECK(header.find(",\"a[1,1]\"") != std::string::npos);
}

TEST_CASE("fit output is byte-identical across runs and thread counts") {
  REQUIRE(cli(fit_args(ws().p("d1.csv"), {"--seed", "11", "--threads", "1"})).code == 0);
  REQUIRE(cli(fit_args(ws().p("d2.csv"), {"--seed", "11", "--threads", "4"})).code == 0);
  REQUIRE(cli(fit_args(ws().p("d3.csv"), {"--seed", "11"})).code == 0);
  CHECK(slurp(ws().p("d1.csv")) == slurp(ws().p("d2.csv")));
  CHECK(slurp(ws().p("d1.csv")) == slurp(ws().p("d3.csv")));
  REQUIRE(cli(fit_args(ws().p("d4.csv"), {"--seed", "12"})).code == 0);
  CHECK(slurp(ws().p("d1.csv")) != slurp(ws().p("d4.csv")));
}

TEST_CASE("seed falls back to RUGBAYES_SEED") {
  ::setenv("RUGBAYES_SEED", "11", 1);
  const auto r = cli(fit_args(ws().p("env.csv")));
  ::unsetenv("RUGBAYES_SEED");
  REQUIRE(r.code == 0);
  REQUIRE(cli(fit_args(ws().p("flag.csv"), {"--seed", "11"})).code == 0);
  CHECK(slurp(ws().p("env.csv")) == slurp(ws().p("flag.csv")));

  ::setenv("RUGBAYES_SEED", "abc", 1);
  const auto bad = cli(fit_args(ws().p("bad.csv")));
  ::unsetenv("RUGBAYES_SEED");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("RUGBAYES_SEED") != std::string::npos);
}

TEST_CASE("config file supplies flags and explicit flags win") {
  {
    std::ofstream cfg(ws().p("fit.json"));
    cfg << R"({"data": ")" << ws().data() << R"(", "prev": ")" << ws().prev()
        << R"(", "iters": 300, "warmup": 150, "seed": 11, "model": "I", "no_abilities": true})";
  }
  REQUIRE(cli({"fit", "--config", ws().p("fit.json"), "--model", "II", "--out", ws().p("cfg.csv")}).code == 0);
  REQUIRE(cli(fit_args(ws().p("direct.csv"), {"--seed", "11", "--model", "II", "--no-abilities"})).code == 0);
  CHECK(slurp(ws().p("cfg.csv")) == slurp(ws().p("direct.csv")));
  const auto m = nlohmann::json::parse(slurp(ws().p("cfg.csv.manifest.json")));
  CHECK(m.at("config").at("model") == "II");
  CHECK(m.at("config").at("no_abilities") == true);

  {
    std::ofstream cfg(ws().p("bad.json"));
    cfg << R"({"iterations": 5})";
  }
  const auto r = cli({"fit", "--config", ws().p("bad.json"), "--data", ws().data(), "--prev", ws().prev()});
  CHECK(r.code == 2);
  CHECK(r.err.find("iterations") != std::string::npos);
}

TEST_CASE("errors map to exit codes with module-qualified messages") {
  const auto missing = cli({"fit", "--data", ws().p("nope.csv"), "--prev", ws().prev()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.csv") != std::string::npos);
  CHECK(missing.err.find("error: ingest:") != std::string::npos);

  CHECK(cli({"fit", "--data", ws().data()}).code == 2);
  CHECK(cli({"fit", "--data", ws().data(), "--prev", ws().prev(), "--model", "V"}).code == 2);
  CHECK(cli({"fit", "--data", ws().data(), "--prev", ws().prev(), "--model", "IV"}).code == 2);
  CHECK(cli({"fit", "--data", ws().data(), "--prev", ws().prev(), "--iters", "100", "--warmup", "150"}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  // Identical score differences: the standardization scale is undefined.
  {
    std::ofstream flat(ws().p("flat.csv"));
    flat << "round,home_team,away_team,home_score,away_score,home_tries,away_tries,home_conv_att,home_pen_att,home_drop_att,"
            "away_conv_att,away_pen_att,away_drop_att,attendance,weekend,canceled\n"
            "1,A,B,10,3,1,0,1,1,0,0,1,0,1,1,0\n"
            "2,B,A,10,3,1,0,1,1,0,0,1,0,1,1,0\n";
  }
  const auto numeric = cli({"features", "--data", ws().p("flat.csv"), "--prev", ws().prev(), "--out", ws().p("flat_features.csv")});
  CHECK(numeric.code == 1);
  CHECK(numeric.err.find("error: features:") != std::string::npos);
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = RUGBAYES_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + quiet).c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status("--help") == 0);
  CHECK(status("fit --data " + ws().p("nope.csv") + " --prev " + ws().prev()) == 2);
  CHECK(status("luck --var-performance 0.03798835 --var-effort 0.01563645 --games 22 --out " + ws().p("bin_luck.json")) == 0);
}

TEST_CASE("luck reproduces the published decomposition") {
  const auto r = cli({"luck", "--var-performance", "0.03798835", "--var-effort", "0.01563645", "--games", "22", "--out", ws().p("luck.json")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(ws().p("luck.json")));
  CHECK(std::abs(j.at("var_luck").get<double>() - 0.01136364) < 1e-8);
  CHECK(std::abs(j.at("var_ability").get<double>() - 0.01098826) < 1e-8);
  CHECK(j.at("ability_negative") == false);
  CHECK(fs::exists(ws().p("luck.json.manifest.json")));

  CHECK(cli({"luck", "--var-performance", "0.03", "--var-effort", "0.01", "--out", ws().p("l.json")}).code == 2);
  CHECK(cli({"luck", "--out", ws().p("l.json")}).code == 2);

  const auto d = cli({"luck", "--data", ws().data(), "--out", ws().p("luck_data.json")});
  REQUIRE(d.code == 0);
  const auto jd = nlohmann::json::parse(slurp(ws().p("luck_data.json")));
  CHECK(jd.at("g") == 6);
  CHECK(jd.at("source") == "data");
  CHECK(jd.at("performance_conventions").contains("count_population"));
  CHECK(jd.at("var_luck").get<double>() == doctest::Approx(0.25 / 6));
}

TEST_CASE("ppc writes tables and histograms that add up") {
  REQUIRE(cli(fit_args(ws().p("ppc_draws.csv"), {"--seed", "3"})).code == 0);
  const auto out = ws().p("ppc");
  const auto r = cli({"ppc", "--data", ws().data(), "--prev", ws().prev(), "--draws", ws().p("ppc_draws.csv"), "--seed", "4", "--bins", "12",
                      "--svg", "--out-dir", out});
  REQUIRE(r.code == 0);
  const auto ppc = lines(out + "/ppc.csv");
  CHECK(ppc.front() == "game,observed,pred_mean,pred_sd,pvalue,flag");
  CHECK(ppc.size() == 13);

  const auto hist = lines(out + "/hist_replicated.csv");
  CHECK(hist.front() == "replication,bin,lower,upper,count");
  std::map<int, int> per_rep;
  for (std::size_t i = 1; i < hist.size(); ++i) {
    const auto c = rugbayes::csv::split_line(hist[i]);
    per_rep[std::stoi(c[0])] += std::stoi(c[4]);
  }
  CHECK(per_rep.size() == 600);
  for (const auto& [rep, n] : per_rep) CHECK(n == 12);

  int observed = 0;
  const auto obs = lines(out + "/hist_observed.csv");
  for (std::size_t i = 1; i < obs.size(); ++i) observed += std::stoi(rugbayes::csv::split_line(obs[i]).back());
  CHECK(observed == 12);

  const auto fig = lines(out + "/observed_vs_predicted.csv");
  CHECK(fig.front() == "game,round,home_team,away_team,observed,pred_mean,pred_sd,observed_raw,pred_mean_raw,pred_sd_raw,pvalue,flag");
  CHECK(fig.size() == 13);
  CHECK(fs::exists(out + "/histogram.svg"));
  CHECK(fs::exists(out + "/flags.csv"));
  const auto m = nlohmann::json::parse(slurp(out + "/manifest.json"));
  CHECK(m.at("outputs").size() == 7);

  // Same seed, same outputs.
  REQUIRE(cli({"ppc", "--data", ws().data(), "--prev", ws().prev(), "--draws", ws().p("ppc_draws.csv"), "--seed", "4", "--bins", "12", "--out-dir",
               ws().p("ppc2")})
              .code == 0);
  CHECK(slurp(out + "/ppc.csv") == slurp(ws().p("ppc2/ppc.csv")));

  const auto all = cli({"ppc", "--data", ws().data(), "--prev", ws().prev(), "--draws", ws().p("ppc_draws.csv"), "--alpha", "0.5", "--out-dir",
                        ws().p("ppc3")});
  REQUIRE(all.code == 0);
  CHECK(lines(ws().p("ppc3/flags.csv")).size() == 13);

  // Draws from a different variant do not fit the model.
  CHECK(cli({"ppc", "--data", ws().data(), "--prev", ws().prev(), "--draws", ws().p("m1.csv"), "--model", "III", "--out-dir", ws().p("ppc4")})
            .code == 2);
}

TEST_CASE("features and describe") {
  const auto r = cli({"features", "--data", ws().data(), "--prev", ws().prev(), "--scale", "10", "--out", ws().p("f.csv"), "--effort-summary",
                      ws().p("effort.csv")});
  REQUIRE(r.code == 0);
  const auto f = lines(ws().p("f.csv"));
  CHECK(f.front() == "game,round,home_team,away_team,home_idx,away_idx,home_week,away_week,raw_diff,y,eff_home,eff_away,atten,day");
  CHECK(f.size() == 13);
  CHECK(fs::exists(ws().p("effort.csv")));

  const auto d = cli({"describe", "--data", ws().data(), "--prev", ws().prev(), "--model", "I", "--out", ws().p("describe.json")});
  REQUIRE(d.code == 0);
  const auto j = nlohmann::json::parse(slurp(ws().p("describe.json")));
  CHECK(j.at("games") == 12);
  CHECK(j.at("teams").size() == 4);
  CHECK(j.at("weeks") == 6);
  CHECK(j.at("parameters") == 3 + 2 + 4 + 24);
  CHECK(fs::exists(ws().p("describe.json.manifest.json")));
}

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "rugbayes/csv.hpp"
#include "rugbayes/diagnostics.hpp"
#include "rugbayes/errors.hpp"
#include "rugbayes/features.hpp"
#include "rugbayes/ingest.hpp"
#include "rugbayes/model.hpp"
#include "rugbayes/ppc.hpp"
#include "rugbayes/sampler.hpp"
#include "rugbayes/simulate.hpp"

namespace rugbayes::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kModule = "cli";

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError(kModule, "cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

fs::path manifest_path(const std::string& flag, const fs::path& primary) {
  if (!flag.empty()) return flag;
  if (fs::is_directory(primary)) return primary / "manifest.json";
  return primary.string() + ".manifest.json";
}

std::uint64_t default_seed() {
  const char* env = std::getenv("RUGBAYES_SEED");
  if (!env || !*env) return 1;
  std::int64_t v = 0;
  if (!csv::parse_int(env, v) || v < 0) throw InputError(kModule, "RUGBAYES_SEED must be a nonnegative integer, got '" + std::string(env) + "'");
  return static_cast<std::uint64_t>(v);
}

std::string option_key(const CLI::Option* opt) {
  std::string key = opt->get_name(false, true);
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

// Effective option values (command line, config file or default) keyed like
// the config file.
json effective_config(const CLI::App* sub) {
  json cfg = json::object();
  for (const auto* opt : sub->get_options()) {
    const std::string key = option_key(opt);
    if (key.empty() || key == "help" || key == "config" || key == "manifest") continue;
    if (is_flag(opt)) {
      cfg[key] = opt->count() > 0;
    } else if (opt->count() > 0) {
      cfg[key] = opt->results().front();
    } else if (!opt->get_default_str().empty()) {
      cfg[key] = opt->get_default_str();
    }
  }
  return cfg;
}

// Appends "--key value" for every config entry whose flag is absent from the
// command line, so explicit flags win.
void inject_config(std::vector<std::string>& args, CLI::App* sub, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(kModule, "cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(kModule, path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError(kModule, path.string() + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const auto* opt = sub->get_option_no_throw(flag);
    if (!opt || key == "config") throw InputError(kModule, path.string() + ": unknown key '" + key + "' for command '" + sub->get_name() + "'");
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    if (given) continue;
    if (is_flag(opt)) {
      if (!value.is_boolean()) throw InputError(kModule, path.string() + ": key '" + key + "' must be true or false");
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number() || value.is_boolean()) {
      args.push_back(flag);
      args.push_back(value.dump());
    } else {
      throw InputError(kModule, path.string() + ": key '" + key + "' must be a scalar");
    }
  }
}

struct Loaded {
  Dataset dataset;
  PrevSeasonTable prev;
  FeatureSet features;
};

Dataset load_matches(const std::string& path, std::ostream& err) {
  auto parsed = parse_matches(fs::path(path));
  for (const auto& w : parsed.report.warnings) err << "warning: " << w << '\n';
  return std::move(parsed.dataset);
}

Loaded load_features(const std::string& data, const std::string& prev, std::optional<double> scale, std::ostream& err) {
  Loaded l;
  l.dataset = load_matches(data, err);
  l.prev = parse_prev_season(fs::path(prev));
  l.features = build_features(l.dataset, l.prev, scale);
  return l;
}

ModelConfig model_config(const std::string& variant, const std::string& mode, bool prior_only) {
  ModelConfig mc;
  mc.variant = parse_variant(variant);
  mc.prevperf_mode = parse_prevperf_mode(mode);
  mc.likelihood = !prior_only;
  mc.validate();
  return mc;
}

DrawsMatrix load_draws(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(kModule, "cannot read draws '" + path + "'");
  return read_draws_csv(in, path);
}

// Equal-width bins over [lo, hi]; the top edge is inclusive.
struct Bins {
  double lo = 0.0;
  double width = 1.0;
  int n = 1;

  int index(double x) const { return std::clamp(static_cast<int>(std::floor((x - lo) / width)), 0, n - 1); }
  double edge(int i) const { return lo + width * i; }
};

Bins make_bins(double lo, double hi, int n) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, (hi - lo) / n, n};
}

void write_svg(const fs::path& path, const Bins& bins, const std::vector<double>& observed, const std::vector<double>& replicated,
               const std::string& title) {
  const double w = 640, h = 360, pad = 40;
  const double top = std::max(*std::max_element(observed.begin(), observed.end()), *std::max_element(replicated.begin(), replicated.end()));
  const double bar = (w - 2 * pad) / bins.n;
  auto y_of = [&](double c) { return h - pad - (top > 0 ? c / top : 0.0) * (h - 2 * pad); };
  auto out = open_out(path);
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (int i = 0; i < bins.n; ++i) {
    const double y = y_of(observed[static_cast<std::size_t>(i)]);
    out << "<rect x=\"" << pad + i * bar << "\" y=\"" << y << "\" width=\"" << bar - 1 << "\" height=\"" << h - pad - y
        << "\" fill=\"#9ab\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"2\" points=\"";
  for (int i = 0; i < bins.n; ++i) out << pad + (i + 0.5) * bar << ',' << y_of(replicated[static_cast<std::size_t>(i)]) << ' ';
  out << "\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
  out << std::setprecision(3);
  out << "<text x=\"" << pad << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << bins.edge(0) << "</text>\n";
  out << "<text x=\"" << w - pad << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\" text-anchor=\"end\">" << bins.edge(bins.n)
      << "</text>\n";
  out << "</svg>\n";
}

// ---- commands -------------------------------------------------------------

struct Command {
  std::function<void(CLI::App*)> setup;
  std::function<void(CLI::App*, std::ostream&, std::ostream&)> run;
};

struct FitOpts {
  std::string data, prev, model = "II", prevperf_mode = "tries", out = "draws.csv";
  SamplerConfig sampler;
  double scale = 0.0;
  bool prior_only = false;
  bool no_abilities = false;
};

struct SummarizeOpts {
  std::string draws, out = "summary.csv";
  bool latent = false;
};

struct PpcOpts {
  std::string data, prev, draws, model = "II", prevperf_mode = "tries", out_dir = "ppc";
  double scale = 0.0;
  std::uint64_t seed = 1;
  std::size_t replications = 0;
  double alpha = 0.005;
  int bins = 30;
  bool svg = false;
};

struct LuckOpts {
  std::string data, out = "luck.json";
  double var_performance = 0.0, var_effort = 0.0, p = 0.5;
  int games = 0;
};

struct SimOpts {
  std::string sim_config, out_dir = "sim";
  SimConfig config;
  std::string model = "I";
};

struct FeatureOpts {
  std::string data, prev, out = "features.csv", effort_summary;
  double scale = 0.0;
};

struct DescribeOpts {
  std::string data, prev, model = "II", out = "describe.json";
};

struct Options {
  std::string config, manifest;
  FitOpts fit;
  SummarizeOpts summarize;
  PpcOpts ppc;
  LuckOpts luck;
  SimOpts sim;
  FeatureOpts features;
  DescribeOpts describe;
};

std::optional<double> scale_flag(CLI::App* sub, double value) {
  if (sub->get_option("--scale")->count() == 0) return std::nullopt;
  return value;
}

void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  auto opt = [](const std::optional<double>& v, int prec) {
    std::ostringstream s;
    if (v) s << std::fixed << std::setprecision(prec) << *v;
    else s << "NA";
    return s.str();
  };
  out << std::left << std::setw(14) << "param" << std::right << std::setw(8) << "rhat" << std::setw(8) << "n_eff" << std::setw(9) << "mean"
      << std::setw(9) << "sd" << std::setw(9) << "2.5%" << std::setw(9) << "50%" << std::setw(9) << "97.5%" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(14) << r.param << std::right << std::setw(8) << opt(r.rhat, 3) << std::setw(8) << opt(r.n_eff, 0);
    for (const double v : {r.mean, r.sd, r.q025, r.q500, r.q975}) out << std::setw(9) << opt(v, 3);
    out << '\n';
  }
}

std::map<std::string, Command> commands(Options& o) {
  std::map<std::string, Command> c;

  c["fit"] = {
      [&o](CLI::App* s) {
        auto& f = o.fit;
        s->add_option("--data", f.data, "match CSV")->required();
        s->add_option("--prev", f.prev, "previous-season table CSV")->required();
        s->add_option("--model", f.model, "model variant I, II, III or IV")->capture_default_str();
        s->add_option("--prevperf-mode", f.prevperf_mode, "tries or points")->capture_default_str();
        s->add_option("--chains", f.sampler.chains)->capture_default_str();
        s->add_option("--iters", f.sampler.iters, "iterations per chain including warmup")->capture_default_str();
        s->add_option("--warmup", f.sampler.warmup)->capture_default_str();
        s->add_option("--seed", f.sampler.seed, "default: RUGBAYES_SEED or 1");
        s->add_option("--threads", f.sampler.threads, "chain worker threads, 0 = one per chain")->capture_default_str();
        s->add_option("--target-accept", f.sampler.target_accept)->capture_default_str();
        s->add_option("--max-steps", f.sampler.max_leapfrog_steps)->capture_default_str();
        s->add_option("--scale", f.scale, "points per standardized unit (default: sd of score differences)");
        s->add_flag("--prior-only", f.prior_only, "drop the likelihood");
        s->add_flag("--no-abilities", f.no_abilities, "omit derived a[w,t] columns");
        s->add_option("--out", f.out, "draws CSV")->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream& err) {
        auto& f = o.fit;
        if (s->get_option("--seed")->count() == 0) f.sampler.seed = default_seed();
        RunManifest manifest("fit", effective_config(s), f.sampler.seed);
        auto loaded = load_features(f.data, f.prev, scale_flag(s, f.scale), err);
        manifest.add_input(f.data);
        manifest.add_input(f.prev);
        const ScoreModel model(loaded.features, model_config(f.model, f.prevperf_mode, f.prior_only));
        const auto draws = run_sampler(model, f.sampler);
        {
          auto file = open_out(f.out);
          write_draws_csv(file, draws, f.no_abilities ? nullptr : &model);
        }
        manifest.add_output(f.out);
        auto j = manifest.to_json();
        j["feature_scale"] = loaded.features.scale;
        j["divergences"] = draws.total_divergences();
        for (const auto& st : draws.stats()) {
          j["chains"].push_back({{"step_size", st.step_size}, {"mean_accept", st.mean_accept}, {"divergences", st.divergences}});
        }
        std::ofstream(manifest_path(o.manifest, f.out)) << j.dump(2) << '\n';
        out << "fit: " << draws.chains() << " chains x " << draws.draws() << " draws, " << model.dim() << " parameters, "
            << draws.total_divergences() << " divergences -> " << f.out << '\n';
        if (draws.total_divergences() > 0) err << "warning: " << draws.total_divergences() << " divergent transitions after warmup\n";
      }};

  c["summarize"] = {
      [&o](CLI::App* s) {
        s->add_option("--draws", o.summarize.draws, "draws CSV from fit")->required();
        s->add_flag("--latent", o.summarize.latent, "include sigma_a and eta rows");
        s->add_option("--out", o.summarize.out, "summary CSV")->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream&) {
        auto& f = o.summarize;
        RunManifest manifest("summarize", effective_config(s), 0);
        const auto rows = summarize(load_draws(f.draws), f.latent);
        manifest.add_input(f.draws);
        {
          auto file = open_out(f.out);
          write_summary_csv(file, rows);
        }
        manifest.add_output(f.out);
        manifest.write(manifest_path(o.manifest, f.out));
        print_summary(out, rows);
      }};

  c["ppc"] = {
      [&o](CLI::App* s) {
        auto& f = o.ppc;
        s->add_option("--data", f.data)->required();
        s->add_option("--prev", f.prev)->required();
        s->add_option("--draws", f.draws)->required();
        s->add_option("--model", f.model)->capture_default_str();
        s->add_option("--prevperf-mode", f.prevperf_mode)->capture_default_str();
        s->add_option("--scale", f.scale, "must match the value used by fit");
        s->add_option("--seed", f.seed, "default: RUGBAYES_SEED or 1");
        s->add_option("--replications", f.replications, "0 = one per stored draw")->capture_default_str();
        s->add_option("--alpha", f.alpha, "two-sided outlier threshold")->capture_default_str();
        s->add_option("--bins", f.bins, "histogram bins")->capture_default_str()->check(CLI::PositiveNumber);
        s->add_flag("--svg", f.svg, "also render histogram.svg");
        s->add_option("--out-dir", f.out_dir)->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream& err) {
        auto& f = o.ppc;
        if (s->get_option("--seed")->count() == 0) f.seed = default_seed();
        RunManifest manifest("ppc", effective_config(s), f.seed);
        auto loaded = load_features(f.data, f.prev, scale_flag(s, f.scale), err);
        const ScoreModel model(loaded.features, model_config(f.model, f.prevperf_mode, false));
        const auto draws = load_draws(f.draws);
        for (const auto& p : {f.data, f.prev, f.draws}) manifest.add_input(p);
        const auto reps = replicate_scores(draws, model, f.seed, f.replications > 0 ? std::optional(f.replications) : std::nullopt);
        const auto flags = flag_outliers(reps, f.alpha);
        const fs::path dir = f.out_dir;
        fs::create_directories(dir);
        const double scale = loaded.features.scale;
        const auto& matches = loaded.dataset.matches;

        auto emit = [&](const std::string& name, auto&& body) {
          auto file = open_out(dir / name);
          body(file);
          manifest.add_output(dir / name);
        };
        emit("ppc.csv", [&](std::ostream& os) { write_ppc_csv(os, reps, f.alpha); });

        std::vector<std::string_view> flag_of(reps.games, "none");
        for (const auto& fl : flags) flag_of[fl.game] = to_string(fl.side);
        emit("observed_vs_predicted.csv", [&](std::ostream& os) {
          os << "game,round,home_team,away_team,observed,pred_mean,pred_sd,observed_raw,pred_mean_raw,pred_sd_raw,pvalue,flag\n";
          for (std::size_t g = 0; g < reps.games; ++g) {
            const auto& m = matches[g];
            os << g + 1 << ',' << m.round << ',' << m.home_team << ',' << m.away_team << ',' << csv::format_double(reps.observed[g]) << ','
               << csv::format_double(reps.pred_mean[g]) << ',' << csv::format_double(reps.pred_sd[g]) << ','
               << csv::format_double(reps.observed[g] * scale) << ',' << csv::format_double(reps.pred_mean[g] * scale) << ','
               << csv::format_double(reps.pred_sd[g] * scale) << ',' << csv::format_double(reps.pvalues[g]) << ',' << flag_of[g] << '\n';
          }
        });
        emit("flags.csv", [&](std::ostream& os) {
          os << "game,round,home_team,away_team,observed,observed_raw,pvalue,side\n";
          for (const auto& fl : flags) {
            const auto& m = matches[fl.game];
            os << fl.game + 1 << ',' << m.round << ',' << m.home_team << ',' << m.away_team << ',' << csv::format_double(reps.observed[fl.game])
               << ',' << csv::format_double(reps.observed[fl.game] * scale) << ',' << csv::format_double(fl.pvalue) << ',' << to_string(fl.side)
               << '\n';
          }
        });
        emit("replication_stats.csv", [&](std::ostream& os) {
          os << "replication,mean,sd\n";
          for (std::size_t r = 0; r < reps.replications; ++r) {
            os << r + 1 << ',' << csv::format_double(reps.rep_mean[r]) << ',' << csv::format_double(reps.rep_sd[r]) << '\n';
          }
        });

        const auto [lo_it, hi_it] = std::minmax_element(reps.values.begin(), reps.values.end());
        const auto [olo, ohi] = std::minmax_element(reps.observed.begin(), reps.observed.end());
        const Bins bins = make_bins(std::min(*lo_it, *olo), std::max(*hi_it, *ohi), f.bins);
        std::vector<double> observed(static_cast<std::size_t>(bins.n), 0.0), pooled(static_cast<std::size_t>(bins.n), 0.0);
        for (const double y : reps.observed) observed[static_cast<std::size_t>(bins.index(y))] += 1.0;
        emit("hist_observed.csv", [&](std::ostream& os) {
          os << "bin,lower,upper,lower_raw,upper_raw,count\n";
          for (int b = 0; b < bins.n; ++b) {
            os << b + 1 << ',' << csv::format_double(bins.edge(b)) << ',' << csv::format_double(bins.edge(b + 1)) << ','
               << csv::format_double(bins.edge(b) * scale) << ',' << csv::format_double(bins.edge(b + 1) * scale) << ','
               << observed[static_cast<std::size_t>(b)] << '\n';
          }
        });
        emit("hist_replicated.csv", [&](std::ostream& os) {
          os << "replication,bin,lower,upper,count\n";
          std::vector<int> counts(static_cast<std::size_t>(bins.n));
          for (std::size_t r = 0; r < reps.replications; ++r) {
            std::fill(counts.begin(), counts.end(), 0);
            for (const double v : reps.replication(r)) ++counts[static_cast<std::size_t>(bins.index(v))];
            for (int b = 0; b < bins.n; ++b) {
              pooled[static_cast<std::size_t>(b)] += counts[static_cast<std::size_t>(b)];
              os << r + 1 << ',' << b + 1 << ',' << csv::format_double(bins.edge(b)) << ',' << csv::format_double(bins.edge(b + 1)) << ','
                 << counts[static_cast<std::size_t>(b)] << '\n';
            }
          }
        });
        for (auto& p : pooled) p /= static_cast<double>(reps.replications);
        if (f.svg) {
          write_svg(dir / "histogram.svg", bins, observed, pooled, "observed (bars) vs mean replicated (line) score differences");
          manifest.add_output(dir / "histogram.svg");
        }
        manifest.write(manifest_path(o.manifest, dir));
        out << "ppc: " << reps.replications << " replications of " << reps.games << " games, " << flags.size() << " flagged at alpha "
            << f.alpha << '\n';
        for (const auto& fl : flags) {
          const auto& m = matches[fl.game];
          out << "  game " << fl.game + 1 << " (round " << m.round << ", " << m.home_team << " v " << m.away_team << ") p = " << fl.pvalue
              << ' ' << to_string(fl.side) << '\n';
        }
      }};

  c["luck"] = {
      [&o](CLI::App* s) {
        auto& f = o.luck;
        s->add_option("--data", f.data, "match CSV; wins and efforts are computed from it");
        s->add_option("--var-performance", f.var_performance);
        s->add_option("--var-effort", f.var_effort);
        s->add_option("--games", f.games, "games per team (default from --data)");
        s->add_option("--p", f.p, "per-game win probability under pure luck")->capture_default_str();
        s->add_option("--out", f.out, "decomposition JSON")->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream& err) {
        auto& f = o.luck;
        RunManifest manifest("luck", effective_config(s), 0);
        const bool have_vars = s->get_option("--var-performance")->count() > 0 && s->get_option("--var-effort")->count() > 0;
        const bool have_games = s->get_option("--games")->count() > 0;
        json j;
        LuckDecomposition d;
        if (!f.data.empty()) {
          if (have_vars) throw InputError(kModule, "luck: give either --data or --var-performance/--var-effort, not both");
          const auto ds = load_matches(f.data, err);
          manifest.add_input(f.data);
          std::vector<double> wins(ds.nteams(), 0.0);
          std::vector<int> played(ds.nteams(), 0);
          std::vector<double> efforts;
          for (const auto& m : ds.matches) {
            const auto h = static_cast<std::size_t>(ds.team_index(m.home_team));
            const auto a = static_cast<std::size_t>(ds.team_index(m.away_team));
            const double diff = m.raw_diff();
            wins[h] += diff > 0 ? 1.0 : diff == 0 ? 0.5 : 0.0;
            wins[a] += diff < 0 ? 1.0 : diff == 0 ? 0.5 : 0.0;
            ++played[h];
            ++played[a];
            efforts.push_back(compute_effort(m.home_tries, m.home_conv_att, m.home_pen_att, m.home_drop_att));
            efforts.push_back(compute_effort(m.away_tries, m.away_conv_att, m.away_pen_att, m.away_drop_att));
          }
          int g = f.games;
          if (!have_games) {
            const auto [lo, hi] = std::minmax_element(played.begin(), played.end());
            if (*lo != *hi) err << "warning: teams played between " << *lo << " and " << *hi << " games; using the maximum\n";
            g = *hi;
          }
          d = luck_decomposition(wins, efforts, g, f.p);
          const auto conv = performance_conventions(wins, g);
          j["performance_conventions"] = {{"fraction_sample", conv.fraction_sample},
                                          {"fraction_population", conv.fraction_population},
                                          {"count_sample", conv.count_sample},
                                          {"count_population", conv.count_population}};
          j["source"] = "data";
        } else {
          if (!have_vars) throw InputError(kModule, "luck: need --data or both --var-performance and --var-effort");
          if (!have_games) throw InputError(kModule, "luck: --games is required with --var-performance/--var-effort");
          d = decompose_variance(f.var_performance, f.var_effort, f.games, f.p);
          j["source"] = "inputs";
        }
        j["var_performance"] = d.var_performance;
        j["var_luck"] = d.var_luck;
        j["var_effort"] = d.var_effort;
        j["var_ability"] = d.var_ability;
        j["ability_negative"] = d.ability_negative;
        j["p"] = d.p;
        j["g"] = d.g;
        {
          auto file = open_out(f.out);
          file << j.dump(2) << '\n';
        }
        manifest.add_output(f.out);
        manifest.write(manifest_path(o.manifest, f.out));
        out << std::setprecision(8) << "var_performance " << d.var_performance << "\nvar_luck        " << d.var_luck << "\nvar_effort      "
            << d.var_effort << "\nvar_ability     " << d.var_ability << (d.ability_negative ? "  (negative)" : "") << '\n';
      }};

  c["simulate"] = {
      [&o](CLI::App* s) {
        auto& c = o.sim.config;
        s->add_option("--sim-config", o.sim.sim_config, "JSON with simulator settings (flags override it)");
        s->add_option("--teams", c.nteams)->capture_default_str();
        s->add_option("--rounds", c.nrounds)->capture_default_str();
        s->add_option("--model", o.sim.model)->capture_default_str();
        s->add_option("--b-home", c.b_home)->capture_default_str();
        s->add_option("--b-prev", c.b_prev)->capture_default_str();
        s->add_option("--b-effort", c.b_effort)->capture_default_str();
        s->add_option("--b-atten", c.b_atten)->capture_default_str();
        s->add_option("--b-day", c.b_day)->capture_default_str();
        s->add_option("--nu", c.nu)->capture_default_str();
        s->add_option("--sigma-y", c.sigma_y)->capture_default_str();
        s->add_option("--eta-sd", c.eta_sd)->capture_default_str();
        s->add_option("--attendance-prob", c.attendance_prob)->capture_default_str();
        s->add_option("--weekend-prob", c.weekend_prob)->capture_default_str();
        s->add_option("--points-scale", c.points_scale, "points per standardized unit")->capture_default_str();
        s->add_option("--seed", c.seed, "default: RUGBAYES_SEED or 1");
        s->add_option("--out-dir", o.sim.out_dir)->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream&) {
        auto& opts = o.sim;
        SimConfig cfg;
        if (!opts.sim_config.empty()) {
          std::ifstream in(opts.sim_config);
          if (!in) throw InputError(kModule, "cannot read '" + opts.sim_config + "'");
          try {
            cfg = sim_config_from_json(json::parse(in));
          } catch (const json::exception& e) {
            throw InputError(kModule, opts.sim_config + ": invalid JSON: " + e.what());
          }
        } else {
          cfg.seed = default_seed();
        }
        // Flags given on the command line (or via --config) override.
        auto take = [&](const char* flag, auto& dst, const auto& src) {
          if (s->get_option(flag)->count() > 0) dst = src;
        };
        const auto& f = opts.config;
        take("--teams", cfg.nteams, f.nteams);
        take("--rounds", cfg.nrounds, f.nrounds);
        if (s->get_option("--model")->count() > 0) cfg.variant = parse_variant(opts.model);
        take("--b-home", cfg.b_home, f.b_home);
        take("--b-prev", cfg.b_prev, f.b_prev);
        take("--b-effort", cfg.b_effort, f.b_effort);
        take("--b-atten", cfg.b_atten, f.b_atten);
        take("--b-day", cfg.b_day, f.b_day);
        take("--nu", cfg.nu, f.nu);
        take("--sigma-y", cfg.sigma_y, f.sigma_y);
        take("--eta-sd", cfg.eta_sd, f.eta_sd);
        take("--attendance-prob", cfg.attendance_prob, f.attendance_prob);
        take("--weekend-prob", cfg.weekend_prob, f.weekend_prob);
        take("--points-scale", cfg.points_scale, f.points_scale);
        take("--seed", cfg.seed, f.seed);

        json eff = effective_config(s);
        eff["simulator"] = to_json(cfg);
        RunManifest manifest("simulate", eff, cfg.seed);
        if (!opts.sim_config.empty()) manifest.add_input(opts.sim_config);
        const auto season = simulate_season(cfg);
        const fs::path dir = opts.out_dir;
        fs::create_directories(dir);
        {
          auto m = open_out(dir / "matches.csv");
          write_matches(m, season.dataset);
          auto p = open_out(dir / "prev.csv");
          write_prev_season(p, season.prev);
          auto t = open_out(dir / "truth.json");
          t << season.truth.to_json().dump(2) << '\n';
        }
        for (const char* name : {"matches.csv", "prev.csv", "truth.json"}) manifest.add_output(dir / name);
        manifest.write(manifest_path(o.manifest, dir));
        out << "simulate: " << season.dataset.ngames() << " games, " << cfg.nteams << " teams -> " << dir.string() << "\n"
            << "  fit in truth units with --scale " << csv::format_double(cfg.points_scale) << '\n';
      }};

  c["features"] = {
      [&o](CLI::App* s) {
        auto& f = o.features;
        s->add_option("--data", f.data)->required();
        s->add_option("--prev", f.prev)->required();
        s->add_option("--scale", f.scale);
        s->add_option("--out", f.out, "per-game feature CSV")->capture_default_str();
        s->add_option("--effort-summary", f.effort_summary, "also write the effort summary table here");
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream& err) {
        auto& f = o.features;
        RunManifest manifest("features", effective_config(s), 0);
        const auto l = load_features(f.data, f.prev, scale_flag(s, f.scale), err);
        manifest.add_input(f.data);
        manifest.add_input(f.prev);
        {
          auto file = open_out(f.out);
          write_feature_dump(file, l.dataset, l.features);
        }
        manifest.add_output(f.out);
        if (!f.effort_summary.empty()) {
          auto file = open_out(f.effort_summary);
          write_effort_summary(file, summarize_features(l.dataset, l.features));
          file.close();
          manifest.add_output(f.effort_summary);
        }
        manifest.write(manifest_path(o.manifest, f.out));
        out << "features: " << l.features.ngames() << " games, " << l.features.nteams << " teams, " << l.features.nweeks
            << " weeks, scale " << csv::format_double(l.features.scale) << " points\n";
      }};

  c["describe"] = {
      [&o](CLI::App* s) {
        auto& f = o.describe;
        s->add_option("--data", f.data)->required();
        s->add_option("--prev", f.prev, "previous-season table; adds prevperf and parameter counts");
        s->add_option("--model", f.model)->capture_default_str();
        s->add_option("--out", f.out)->capture_default_str();
      },
      [&o](CLI::App* s, std::ostream& out, std::ostream&) {
        auto& f = o.describe;
        RunManifest manifest("describe", effective_config(s), 0);
        auto parsed = parse_matches(fs::path(f.data));
        manifest.add_input(f.data);
        const auto& ds = parsed.dataset;
        int max_round = 0;
        for (const auto& m : ds.matches) max_round = std::max(max_round, m.round);
        json j{{"rows", parsed.report.rows},
               {"games", ds.ngames()},
               {"canceled", parsed.report.canceled},
               {"teams", ds.teams},
               {"rounds", max_round},
               {"warnings", parsed.report.warnings}};
        if (!f.prev.empty()) {
          const auto prev = parse_prev_season(fs::path(f.prev));
          manifest.add_input(f.prev);
          const auto feats = build_features(ds, prev);
          const ParameterLayout layout(parse_variant(f.model), feats.nteams, std::max(feats.nweeks, 1));
          json pp = json::object();
          for (std::size_t t = 0; t < ds.teams.size(); ++t) pp[ds.teams[t]] = feats.prevperf[t];
          j["prevperf"] = pp;
          j["weeks"] = feats.nweeks;
          j["scale"] = feats.scale;
          j["model"] = f.model;
          j["parameters"] = layout.size();
        }
        {
          auto file = open_out(f.out);
          file << j.dump(2) << '\n';
        }
        manifest.add_output(f.out);
        manifest.write(manifest_path(o.manifest, f.out));
        out << j.dump(2) << '\n';
      }};
  return c;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Bayesian score-difference model for rugby seasons", "rugbayes-cli"};
  app.set_version_flag("--version", RUGBAYES_VERSION);
  app.require_subcommand(1);
  auto cmds = commands(opts);
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help{
      {"fit", "sample the posterior and write draws"},
      {"summarize", "posterior summary table with rhat and n_eff"},
      {"ppc", "posterior predictive replications, p-values, outliers and histograms"},
      {"luck", "variance decomposition into luck, effort and ability"},
      {"simulate", "synthetic season with known parameters"},
      {"features", "per-game model inputs"},
      {"describe", "dataset overview"}};
  for (auto& [name, cmd] : cmds) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", opts.config, "JSON file with the same keys as the flags");
    sub->add_option("--manifest", opts.manifest, "manifest path (default next to the output)");
    cmd.setup(sub);
    subs[name] = sub;
  }

  try {
    // Config values become ordinary flags appended after the explicit ones.
    if (!args.empty() && subs.count(args.front())) {
      for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        if (!path.empty()) {
          inject_config(args, subs[args.front()], path);
          break;
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      err << "error: cli: " << e.what() << "\nRun with --help for usage.\n";
      return kInputFailure;
    }
    for (auto& [name, sub] : subs) {
      if (sub->parsed()) cmds.at(name).run(sub, out, err);
    }
    return kOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputFailure;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: cli: " << e.what() << '\n';
    return kInputFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
}

}  // namespace rugbayes::cli

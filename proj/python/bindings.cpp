#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "rugbayes/diagnostics.hpp"
#include "rugbayes/errors.hpp"
#include "rugbayes/features.hpp"
#include "rugbayes/ingest.hpp"
#include "rugbayes/model.hpp"
#include "rugbayes/ppc.hpp"
#include "rugbayes/sampler.hpp"
#include "rugbayes/simulate.hpp"

namespace py = pybind11;
using namespace rugbayes;

namespace {

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::dict& d) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(d).cast<std::string>());
}

ModelConfig make_config(const std::string& model, const std::string& prevperf_mode, bool prior_only) {
  ModelConfig mc;
  mc.variant = parse_variant(model);
  mc.prevperf_mode = parse_prevperf_mode(prevperf_mode);
  mc.likelihood = !prior_only;
  mc.validate();
  return mc;
}

// A fitted model: the model it was fitted with and its constrained draws.
struct Fit {
  std::shared_ptr<const ScoreModel> model;
  DrawsMatrix draws;

  py::array_t<double> array() const {
    py::array_t<double> out({draws.chains(), draws.draws(), static_cast<int>(draws.nparams())});
    auto v = out.mutable_unchecked<3>();
    for (int c = 0; c < draws.chains(); ++c) {
      for (int i = 0; i < draws.draws(); ++i) {
        for (std::size_t p = 0; p < draws.nparams(); ++p) v(c, i, static_cast<py::ssize_t>(p)) = draws(c, i, p);
      }
    }
    return out;
  }
};

py::dict summary_row(const SummaryRow& r) {
  py::dict d;
  d["param"] = r.param;
  d["rhat"] = r.rhat ? py::cast(*r.rhat) : py::none();
  d["n_eff"] = r.n_eff ? py::cast(*r.n_eff) : py::none();
  d["mean"] = r.mean;
  d["sd"] = r.sd;
  d["q025"] = r.q025;
  d["q500"] = r.q500;
  d["q975"] = r.q975;
  return d;
}

ChainDraws to_chains(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InputError("diagnostics", "expected a 2-D array (chains x draws)");
  const auto v = a.unchecked<2>();
  ChainDraws out(static_cast<std::size_t>(v.shape(0)));
  for (py::ssize_t c = 0; c < v.shape(0); ++c) {
    for (py::ssize_t i = 0; i < v.shape(1); ++i) out[static_cast<std::size_t>(c)].push_back(v(c, i));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian score-difference model for rugby seasons";
  m.attr("__version__") = RUGBAYES_VERSION;

  static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    }
  });

  py::class_<FeatureSet>(m, "FeatureSet")
      .def_property_readonly("ngames", &FeatureSet::ngames)
      .def_readonly("nteams", &FeatureSet::nteams)
      .def_readonly("nweeks", &FeatureSet::nweeks)
      .def_readonly("scale", &FeatureSet::scale)
      .def_readonly("prevperf", &FeatureSet::prevperf)
      .def_property_readonly("y", [](const FeatureSet& f) {
        std::vector<double> y;
        for (const auto& g : f.observations) y.push_back(g.y);
        return y;
      })
      .def("shift_outcome", [](FeatureSet& f, std::size_t game, double delta) {
        if (game >= f.ngames()) throw InputError("features", "game index out of range");
        f.observations[game].y += delta;
      }, py::arg("game"), py::arg("delta"), "Add delta (standardized units) to one game's outcome.");

  m.def("load_features", [](const std::string& matches, const std::string& prev, std::optional<double> scale) {
    const auto parsed = parse_matches(std::filesystem::path(matches));
    return build_features(parsed.dataset, parse_prev_season(std::filesystem::path(prev)), scale);
  }, py::arg("matches"), py::arg("prev"), py::arg("scale") = py::none(), "Read a match CSV and previous-season table into model inputs.");

  m.def("simulate", [](const py::dict& config) {
    const auto season = simulate_season(sim_config_from_json(py_to_json(config)));
    py::dict out;
    out["features"] = season.features;
    out["truth"] = json_to_py(season.truth.to_json());
    return out;
  }, py::arg("config") = py::dict(), "Synthetic season; config keys as in the simulator JSON.");

  m.def("log_posterior", [](const FeatureSet& f, const std::vector<double>& theta, const std::string& model) {
    const ScoreModel sm(f, make_config(model, model == "IV" ? "points" : "tries", false));
    std::vector<double> grad(theta.size());
    const double lp = sm.log_posterior_gradient(theta, grad);
    return py::make_tuple(lp, grad);
  }, py::arg("features"), py::arg("theta"), py::arg("model") = "II", "Log posterior and its gradient on the unconstrained scale.");

  m.def("parameter_names", [](const FeatureSet& f, const std::string& model) {
    return ParameterLayout(parse_variant(model), f.nteams, std::max(f.nweeks, 1)).names();
  }, py::arg("features"), py::arg("model") = "II");

  py::class_<Fit>(m, "Fit")
      .def_property_readonly("names", [](const Fit& f) { return f.draws.names(); })
      .def_property_readonly("draws", &Fit::array, "chains x draws x parameters, constrained scale")
      .def_property_readonly("divergences", [](const Fit& f) { return f.draws.total_divergences(); })
      .def_property_readonly("step_sizes", [](const Fit& f) {
        std::vector<double> s;
        for (const auto& st : f.draws.stats()) s.push_back(st.step_size);
        return s;
      })
      .def("param", [](const Fit& f, const std::string& name) {
        const auto idx = f.draws.index_of(name);
        if (!idx) throw InputError("sampler", "no parameter '" + name + "'");
        const auto chains = f.draws.param_chains(*idx);
        py::array_t<double> out({f.draws.chains(), f.draws.draws()});
        auto v = out.mutable_unchecked<2>();
        for (int c = 0; c < f.draws.chains(); ++c) {
          for (int i = 0; i < f.draws.draws(); ++i) v(c, i) = chains[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        }
        return out;
      }, py::arg("name"))
      .def("summary", [](const Fit& f, bool latent) {
        py::list rows;
        for (const auto& r : summarize(f.draws, latent)) rows.append(summary_row(r));
        return rows;
      }, py::arg("latent") = false)
      .def("ppc", [](const Fit& f, std::uint64_t seed, std::optional<std::size_t> replications, double alpha) {
        const auto reps = replicate_scores(f.draws, *f.model, seed, replications);
        py::list flags;
        for (const auto& fl : flag_outliers(reps, alpha)) flags.append(py::make_tuple(fl.game, fl.pvalue, std::string(to_string(fl.side))));
        py::dict out;
        out["pvalues"] = reps.pvalues;
        out["pred_mean"] = reps.pred_mean;
        out["pred_sd"] = reps.pred_sd;
        out["observed"] = reps.observed;
        out["flags"] = flags;
        py::array_t<double> values({reps.replications, reps.games});
        std::copy(reps.values.begin(), reps.values.end(), values.mutable_data());
        out["replications"] = values;
        return out;
      }, py::arg("seed") = 1, py::arg("replications") = py::none(), py::arg("alpha") = 0.005,
         "Posterior predictive replications, p-values and outlier flags.");

  m.def("fit", [](const FeatureSet& features, const std::string& model, int chains, int iters, int warmup, std::uint64_t seed, int threads,
                  bool prior_only, const std::string& prevperf_mode) {
    auto sm = std::make_shared<const ScoreModel>(features, make_config(model, prevperf_mode, prior_only));
    SamplerConfig cfg;
    cfg.chains = chains;
    cfg.iters = iters;
    cfg.warmup = warmup;
    cfg.seed = seed;
    cfg.threads = threads;
    DrawsMatrix draws;
    {
      py::gil_scoped_release release;
      draws = run_sampler(*sm, cfg);
    }
    return Fit{std::move(sm), std::move(draws)};
  }, py::arg("features"), py::arg("model") = "II", py::arg("chains") = 4, py::arg("iters") = 2500, py::arg("warmup") = 1500, py::arg("seed") = 1,
     py::arg("threads") = 0, py::arg("prior_only") = false, py::arg("prevperf_mode") = "tries", "Sample the posterior with adaptive HMC.");

  m.def("split_rhat", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) { return split_rhat(to_chains(a)); },
        py::arg("draws"), "Split R-hat of a chains x draws array; None when undefined.");
  m.def("effective_sample_size",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) { return effective_sample_size(to_chains(a)); },
        py::arg("draws"));

  m.def("luck_decomposition", [](double var_performance, double var_effort, int g, double p) {
    const auto d = decompose_variance(var_performance, var_effort, g, p);
    py::dict out;
    out["var_performance"] = d.var_performance;
    out["var_luck"] = d.var_luck;
    out["var_effort"] = d.var_effort;
    out["var_ability"] = d.var_ability;
    out["ability_negative"] = d.ability_negative;
    out["p"] = d.p;
    out["g"] = d.g;
    return out;
  }, py::arg("var_performance"), py::arg("var_effort"), py::arg("g"), py::arg("p") = 0.5);
}

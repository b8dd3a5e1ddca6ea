#include "hmmgl/baselines.hpp"
#include "hmmgl/em_engine.hpp"
#include "hmmgl/glasso.hpp"
#include "hmmgl/hmm_core.hpp"
#include "hmmgl/io.hpp"
#include "hmmgl/model_selection.hpp"
#include "hmmgl/pruning.hpp"
#include "hmmgl/simbench.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hmmgl;

namespace {

// Same seeding as the command line tool, so results match `hmmgl fit`.
EmInit default_init(const Matrix& data, int k, int restarts, std::uint64_t seed) {
  return kmeans_init(data, k, restarts, derive_seed(seed, static_cast<std::uint64_t>(k)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hidden Markov models with sparse Gaussian emissions";

  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<GlassoNotConverged>(m, "GlassoNotConverged", PyExc_ArithmeticError);

  py::enum_<PenaltyKind>(m, "PenaltyKind")
      .value("invcov", PenaltyKind::invcov)
      .value("parcor", PenaltyKind::parcor)
      .value("invcor", PenaltyKind::invcor);
  py::enum_<CovarianceModel>(m, "CovarianceModel")
      .value("penalized", CovarianceModel::penalized)
      .value("diagonal", CovarianceModel::diagonal);
  py::enum_<Termination>(m, "Termination")
      .value("converged", Termination::converged)
      .value("state_collapsed", Termination::state_collapsed)
      .value("max_iter", Termination::max_iter)
      .value("objective_increase", Termination::objective_increase);
  py::enum_<Criterion>(m, "Criterion").value("bic", Criterion::bic).value("mmdl", Criterion::mmdl);
  py::enum_<DivergenceForm>(m, "DivergenceForm")
      .value("standard", DivergenceForm::standard)
      .value("printed", DivergenceForm::printed);

  py::class_<GaussianState>(m, "GaussianState")
      .def_static("from_precision", &GaussianState::from_precision, py::arg("mean"), py::arg("precision"))
      .def_static("from_covariance", &GaussianState::from_covariance, py::arg("mean"), py::arg("covariance"))
      .def_property_readonly("mean", &GaussianState::mean)
      .def_property_readonly("precision", &GaussianState::precision)
      .def_property_readonly("covariance", &GaussianState::covariance)
      .def_property_readonly("dim", &GaussianState::dim);

  py::class_<HmmModel>(m, "HmmModel")
      .def(py::init<>())
      .def_readwrite("states", &HmmModel::states)
      .def_readwrite("transition", &HmmModel::transition)
      .def_readwrite("initial", &HmmModel::initial)
      .def_property_readonly("num_states", &HmmModel::num_states)
      .def_property_readonly("dim", &HmmModel::dim)
      .def("validate", &HmmModel::validate)
      .def("to_json", [](const HmmModel& model) { return to_json(model).dump(); })
      .def_static("from_json", [](const std::string& s) { return model_from_json(json::parse(s)); });

  py::class_<Responsibilities>(m, "Responsibilities")
      .def_readonly("u", &Responsibilities::u)
      .def_readonly("pairwise", &Responsibilities::pairwise)
      .def_readonly("transition_counts", &Responsibilities::transition_counts)
      .def_readonly("pi", &Responsibilities::pi)
      .def_readonly("log_likelihood", &Responsibilities::log_likelihood);

  m.def("log_emission_density", &log_emission_density, py::arg("x"), py::arg("state"));
  m.def("forward_backward", &forward_backward, py::arg("data"), py::arg("model"),
        py::arg("keep_pairwise") = false, py::call_guard<py::gil_scoped_release>());
  m.def(
      "sample_path",
      [](const HmmModel& model, Index n, std::uint64_t seed) {
        SampledPath path = sample_path(model, n, seed);
        return py::make_tuple(path.data, path.labels);
      },
      py::arg("model"), py::arg("n"), py::arg("seed"));

  py::class_<GlassoResult>(m, "GlassoResult")
      .def_readonly("precision", &GlassoResult::precision)
      .def_readonly("objective", &GlassoResult::objective)
      .def_readonly("iterations", &GlassoResult::iterations);
  m.def(
      "glasso_solve",
      [](const Matrix& cov, PenaltyKind kind, double rho, std::optional<Matrix> warm) {
        return glasso_solve(cov, {kind, rho}, warm);
      },
      py::arg("cov"), py::arg("penalty"), py::arg("rho"), py::arg("warm_start") = std::nullopt,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "glasso_objective",
      [](const Matrix& cov, const Matrix& omega, PenaltyKind kind, double rho) {
        return glasso_objective(cov, omega, {kind, rho});
      },
      py::arg("cov"), py::arg("precision"), py::arg("penalty"), py::arg("rho"));
  m.def("graph_of", &graph_of, py::arg("precision"), py::arg("tol") = kEdgeTolerance);
  m.def("partial_correlation", &partial_correlation, py::arg("precision"));

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("lam", &FitConfig::lambda, "penalty level; None means the universal value")
      .def_readwrite("penalty", &FitConfig::penalty)
      .def_readwrite("eps", &FitConfig::eps)
      .def_readwrite("pi_min", &FitConfig::pi_min, "None means 5 / n")
      .def_readwrite("max_iter", &FitConfig::max_iter)
      .def_readwrite("covariance", &FitConfig::covariance);

  py::class_<EmInit>(m, "EmInit")
      .def(py::init<>())
      .def_readwrite("u", &EmInit::u)
      .def_readwrite("transition", &EmInit::transition)
      .def_readwrite("pi", &EmInit::pi);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("resp", &FitResult::resp)
      .def_readonly("penalized_nll_trace", &FitResult::penalized_nll_trace)
      .def_readonly("termination", &FitResult::termination)
      .def_readonly("collapsed_state", &FitResult::collapsed_state)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("lam", &FitResult::lambda)
      .def_property_readonly("num_states", &FitResult::num_states)
      .def_property_readonly("labels", [](const FitResult& f) { return argmax_labels(f.resp.u); });

  m.def("lambda_uni", &lambda_uni, py::arg("n"), py::arg("p"));
  m.def("kmeans_init", &kmeans_init, py::arg("data"), py::arg("k"), py::arg("restarts") = 10,
        py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("init_from_labels", [](const std::vector<int>& labels, int k) { return init_from_labels(labels, k); },
        py::arg("labels"), py::arg("k"));
  m.def(
      "fit_hmmglasso",
      [](const Matrix& data, int k, const FitConfig& config, std::optional<EmInit> init, int restarts,
         std::uint64_t seed) {
        return fit_hmmglasso(data, k, config, init ? *init : default_init(data, k, restarts, seed));
      },
      py::arg("data"), py::arg("k"), py::arg("config") = FitConfig{}, py::arg("init") = std::nullopt,
      py::arg("restarts") = 10, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
  m.def(
      "fit_unpenalized",
      [](const Matrix& data, int k, const FitConfig& config, std::optional<EmInit> init, int restarts,
         std::uint64_t seed) {
        return fit_unpenalized(data, k, config, init ? *init : default_init(data, k, restarts, seed));
      },
      py::arg("data"), py::arg("k"), py::arg("config") = FitConfig{}, py::arg("init") = std::nullopt,
      py::arg("restarts") = 10, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
  m.def(
      "fit_diagcov",
      [](const Matrix& data, int k, const FitConfig& config, std::optional<EmInit> init, int restarts,
         std::uint64_t seed) {
        return fit_diagcov(data, k, config, init ? *init : default_init(data, k, restarts, seed));
      },
      py::arg("data"), py::arg("k"), py::arg("config") = FitConfig{}, py::arg("init") = std::nullopt,
      py::arg("restarts") = 10, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<ScoreBreakdown>(m, "ScoreBreakdown")
      .def_readonly("criterion", &ScoreBreakdown::criterion)
      .def_readonly("nll", &ScoreBreakdown::nll)
      .def_readonly("transition_cost", &ScoreBreakdown::transition_cost)
      .def_readonly("state_costs", &ScoreBreakdown::state_costs)
      .def_readonly("degrees_of_freedom", &ScoreBreakdown::degrees_of_freedom)
      .def_readonly("total", &ScoreBreakdown::total);
  m.def("score", &score, py::arg("fit"), py::arg("criterion"));
  m.def("sym_kl", &sym_kl, py::arg("a"), py::arg("b"), py::arg("form") = DivergenceForm::standard);

  py::class_<PruneStep>(m, "PruneStep")
      .def_readonly("num_states", &PruneStep::num_states)
      .def_readonly("fit", &PruneStep::fit)
      .def_readonly("bic", &PruneStep::bic)
      .def_readonly("mmdl", &PruneStep::mmdl)
      .def_property_readonly("action", [](const PruneStep& s) -> py::tuple {
        switch (s.action.kind) {
          case PruneAction::Kind::merge: return py::make_tuple("merge", s.action.first, s.action.second);
          case PruneAction::Kind::remove: return py::make_tuple("delete", s.action.first);
          default: return py::make_tuple("initial");
        }
      });
  py::class_<PruneTrace>(m, "PruneTrace")
      .def_readonly("criterion", &PruneTrace::criterion)
      .def_readonly("steps", &PruneTrace::steps)
      .def_readonly("selected_k", &PruneTrace::selected_k)
      .def_property_readonly("selected", &PruneTrace::selected, py::return_value_policy::reference_internal);
  m.def(
      "backward_prune",
      [](const Matrix& data, int k_min, int k_max, const FitConfig& config, Criterion criterion, int restarts,
         std::uint64_t seed, DivergenceForm divergence, int threads) {
        return backward_prune(
            data, k_min, k_max, config, criterion,
            [&](const Matrix& d, int k) { return default_init(d, k, restarts, seed); }, {divergence, threads});
      },
      py::arg("data"), py::arg("k_min"), py::arg("k_max"), py::arg("config") = FitConfig{},
      py::arg("criterion") = Criterion::mmdl, py::arg("restarts") = 10, py::arg("seed") = 1,
      py::arg("divergence") = DivergenceForm::standard, py::arg("threads") = 1,
      py::call_guard<py::gil_scoped_release>());

  m.def("adjusted_rand_index",
        [](const std::vector<int>& a, const std::vector<int>& b) { return adjusted_rand_index(a, b); },
        py::arg("a"), py::arg("b"));
  m.def("argmax_labels", &argmax_labels, py::arg("u"));
  m.def(
      "graph_metrics",
      [](const EdgeSet& estimated, const EdgeSet& truth, int p) {
        const GraphMetrics g = graph_metrics(estimated, truth, p);
        return py::dict(py::arg("tpr") = g.tpr, py::arg("fpr") = g.fpr, py::arg("true_edges") = g.true_edges,
                        py::arg("estimated_edges") = g.estimated_edges);
      },
      py::arg("estimated"), py::arg("truth"), py::arg("p"));
  m.def(
      "pooled_glasso",
      [](const Matrix& data, PenaltyKind kind, double rho) { return pooled_glasso(data, {kind, rho}); },
      py::arg("data"), py::arg("penalty"), py::arg("rho"));

  py::class_<SimSpec>(m, "SimSpec")
      .def(py::init(&SimSpec::defaults), py::arg("model_id") = 1, py::arg("k_true") = 2, py::arg("alpha") = 2.0,
           py::arg("seed") = 1)
      .def_readwrite("model_id", &SimSpec::model_id)
      .def_readwrite("k_true", &SimSpec::k_true)
      .def_readwrite("n", &SimSpec::n)
      .def_readwrite("p", &SimSpec::p)
      .def_readwrite("alpha", &SimSpec::alpha)
      .def_readwrite("seed", &SimSpec::seed)
      .def_readwrite("uneven_mean_blocks", &SimSpec::uneven_mean_blocks);
  py::class_<SimData>(m, "SimData")
      .def_readonly("data", &SimData::data)
      .def_readonly("labels", &SimData::labels)
      .def_readonly("truth", &SimData::truth);
  m.def("generate", &generate, py::arg("spec"));
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"));

  m.def(
      "read_matrix",
      [](const std::string& path, char delimiter, bool header) { return read_matrix(path, {delimiter, header}); },
      py::arg("path"), py::arg("delimiter") = ',', py::arg("header") = false);
  m.def(
      "save_fit",
      [](const std::string& path, const FitResult& fit, const FitConfig& config) {
        save_document(path, make_document(fit, config));
      },
      py::arg("path"), py::arg("fit"), py::arg("config") = FitConfig{});
  m.def(
      "load_model", [](const std::string& path) { return load_document(path).model; }, py::arg("path"));

  m.attr("__version__") = "0.1.0";
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mrq/config.hpp"
#include "mrq/envs.hpp"
#include "mrq/errors.hpp"
#include "mrq/linear_theory.hpp"
#include "mrq/reward_codec.hpp"
#include "mrq/runner.hpp"

namespace py = pybind11;
using namespace mrq;

namespace {

RunConfig build_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  RunConfig cfg = parse_config(text, "<python>");
  for (const auto& [k, v] : overrides) set_key(cfg, k, v);
  finalize(cfg);
  return cfg;
}

py::dict train(const std::string& text, const std::map<std::string, std::string>& overrides, bool write_files) {
  const RunConfig cfg = build_config(text, overrides);
  RunOptions opts;
  opts.write_files = write_files;
  RunResult r;
  {
    py::gil_scoped_release release;
    r = run_training(cfg, opts);
  }
  py::list evals;
  for (const auto& [step, e] : r.evals) {
    evals.append(py::dict(py::arg("step") = step, py::arg("mean_return") = e.mean_return,
                          py::arg("success_rate") = e.success_rate));
  }
  return py::dict(py::arg("exit_code") = r.exit_code, py::arg("error") = r.error, py::arg("steps") = r.steps,
                  py::arg("evals") = evals, py::arg("wall_seconds") = r.wall_seconds);
}

py::dict instance(std::uint64_t seed, int max_states, int max_actions, int max_dim, bool tabular) {
  linear::InstanceOptions o;
  o.max_states = max_states;
  o.max_actions = max_actions;
  o.max_dim = max_dim;
  o.tabular = tabular;
  const auto r = linear::run_instance(seed, o);
  return py::dict(py::arg("seed") = r.seed, py::arg("states") = r.states, py::arg("actions") = r.actions,
                  py::arg("dim") = r.dim, py::arg("skipped") = r.skipped, py::arg("skip_reason") = r.skip_reason,
                  py::arg("mf_mb_gap") = r.mf_mb_gap, py::arg("max_value_error") = r.max_value_error,
                  py::arg("bound") = r.bound, py::arg("bound_holds") = r.bound_holds);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the MR.Q library";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

  m.def("symexp", &symexp);
  m.def("symlog", &symlog);

  py::class_<RewardCodec>(m, "RewardCodec")
      .def(py::init<int, double>(), py::arg("num_bins") = 65, py::arg("range") = 10.0)
      .def_property_readonly("bins", &RewardCodec::bins)
      .def("encode", &RewardCodec::encode)
      .def("decode", [](const RewardCodec& c, const std::vector<double>& w) { return c.decode(w); })
      .def("reward_loss", [](const RewardCodec& c, const std::vector<double>& l, double r) { return c.reward_loss(l, r); });

  py::class_<Env>(m, "Env")
      .def("reset", &Env::reset)
      .def("step",
           [](Env& e, const std::vector<float>& a) {
             const StepResult s = e.step(a);
             return py::make_tuple(s.obs, s.reward, s.terminal, s.truncated);
           })
      .def_property_readonly("name", [](const Env& e) { return e.spec().name; })
      .def_property_readonly("obs_shape", [](const Env& e) { return e.spec().obs_shape; })
      .def_property_readonly("action_dim", [](const Env& e) { return e.spec().action_dim; })
      .def_property_readonly("discrete", [](const Env& e) { return e.spec().discrete(); })
      .def_property_readonly("max_episode_steps", [](const Env& e) { return e.spec().max_episode_steps; })
      .def_property_readonly("success", &Env::success);

  m.def("env_names", &env_names);
  m.def(
      "make_env",
      [](const std::string& name, std::uint64_t seed, int image_size) {
        EnvConfig c;
        c.image_size = image_size;
        return make_env(name, c, seed);
      },
      py::arg("name"), py::arg("seed") = 0, py::arg("image_size") = 84);

  m.def("train", &train, py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("write_files") = false, "Run one training job; config is `key = value` text.");
  m.def("run_instance", &instance, py::arg("seed"), py::arg("max_states") = 20, py::arg("max_actions") = 4,
        py::arg("max_dim") = 10, py::arg("tabular") = false);
  m.def("homomorphism_gaps", [] {
    const auto ex = linear::symmetric_chain();
    const double id = linear::homomorphism_value_check(ex.mdp, linear::identity_abstraction(ex.mdp), ex.policy);
    const double merged = linear::homomorphism_value_check(ex.mdp, ex.merged, ex.policy);
    return py::make_tuple(id, merged);
  });
  m.attr("__version__") = kArtifactVersion;
}

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stabilis/measure.hpp"
#include "stabilis/metrics.hpp"
#include "stabilis/oracle.hpp"
#include "stabilis/scenarios.hpp"

namespace py = pybind11;
using namespace stabilis;

namespace {

std::vector<Prob> to_probs(const std::vector<std::uint64_t>& nums) {
  std::vector<Prob> out;
  out.reserve(nums.size());
  for (std::uint64_t v : nums) {
    if (v == 0) throw OutOfRange("probability numerator 0 is not representable");
    out.emplace_back(v);
  }
  return out;
}

std::vector<std::uint64_t> to_nums(const std::vector<Prob>& probs) {
  std::vector<std::uint64_t> out;
  out.reserve(probs.size());
  for (const Prob& p : probs) out.push_back(p.numerator());
  return out;
}

std::vector<std::uint64_t> numerators(const World& w) {
  std::vector<std::uint64_t> out;
  out.reserve(w.clients.size());
  for (const ClientState& c : w.clients) out.push_back(c.p.numerator());
  return out;
}

std::vector<std::uint64_t> ids(const std::vector<ClientId>& v) {
  std::vector<std::uint64_t> out;
  out.reserve(v.size());
  for (ClientId id : v) out.push_back(id.value);
  return out;
}

py::dict outcome_dict(const RoundOutcome& o) {
  py::dict d;
  d["round"] = o.round;
  d["window"] = o.window;
  d["attempted"] = ids(o.attempted);
  d["survivors"] = ids(o.survivors);
  d["decision"] = o.decision ? py::object(py::str(std::string(to_string(*o.decision)))) : py::object(py::none());
  d["action"] = std::string(to_string(o.action));
  py::list replies;
  for (const ReplyMessage& r : o.replies) replies.append(py::make_tuple(r.target.value, r.new_prob.numerator()));
  d["replies"] = replies;
  return d;
}

py::dict snapshot_dict(const MetricsSnapshot& s) {
  py::dict d;
  d["round"] = s.round;
  d["P"] = exact_str(s.P);
  d["p_min"] = s.p_min;
  d["phi_sq"] = exact_str(s.phi_sq);
  d["phi_minmax"] = exact_str(s.phi_minmax);
  d["phi_mu"] = exact_str(s.phi_mu);
  d["busy"] = s.busy;
  d["fair"] = s.fair;
  d["weakly_fair"] = s.weakly_fair;
  d["stable"] = s.stable ? py::object(py::bool_(*s.stable)) : py::object(py::none());
  return d;
}

StopPredicate stop_rule(const std::string& name) {
  if (name == "legitimate") return [](const World& w) { return is_legitimate(w); };
  if (name == "busy") return [](const World& w) { return is_busy(w); };
  if (name == "none") return {};
  throw ConfigError("unknown stop rule '" + name + "' (expected legitimate, busy or none)");
}

std::vector<std::uint64_t> table_heads(const EstimatorTable& t) {
  std::vector<std::uint64_t> out;
  for (const Column& c : t.columns()) out.push_back(c.c);
  return out;
}

std::vector<std::uint64_t> table_times(const EstimatorTable& t) {
  std::vector<std::uint64_t> out;
  for (const Column& c : t.columns()) out.push_back(c.t);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulator core: protocol arithmetic, round engine, metrics, scenarios and oracles.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<OutOfRange>(m, "OutOfRange", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<TargetMismatch>(m, "TargetMismatch", base.ptr());
  py::register_exception<CapacityViolation>(m, "CapacityViolation", base.ptr());
  py::register_exception<StrategyMismatch>(m, "StrategyMismatch", base.ptr());
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", base.ptr());
  py::register_exception<Infeasible>(m, "Infeasible", base.ptr());
  py::register_exception<PreconditionViolated>(m, "PreconditionViolated", base.ptr());

  py::class_<Rational>(m, "Rational")
      .def(py::init<std::int64_t>())
      .def(py::init<std::int64_t, std::int64_t>())
      .def(py::init([](const std::string& s) { return Rational::parse(s); }))
      .def_property_readonly("num", &Rational::num)
      .def_property_readonly("den", &Rational::den)
      .def("__float__", &Rational::to_double)
      .def("__str__", &Rational::str)
      .def("__repr__", [](const Rational& r) { return "Rational('" + r.str() + "')"; })
      .def(py::self == py::self);
  py::implicitly_convertible<std::int64_t, Rational>();
  py::implicitly_convertible<std::string, Rational>();

  py::enum_<StrategyKind>(m, "Strategy")
      .value("STRATEGY1", StrategyKind::Strategy1)
      .value("STRATEGY2", StrategyKind::Strategy2)
      .value("FIXED", StrategyKind::Fixed);
  py::enum_<DeltaFormula>(m, "DeltaFormula").value("RAW", DeltaFormula::Raw).value("ANALYTIC", DeltaFormula::Analytic);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_readwrite("n", &Config::n)
      .def_readwrite("sigma", &Config::sigma)
      .def_readwrite("L", &Config::L)
      .def_readwrite("R", &Config::R)
      .def_readwrite("epsilon", &Config::epsilon)
      .def_readwrite("phat", &Config::phat)
      .def_readwrite("W", &Config::W)
      .def_readwrite("b", &Config::b)
      .def_readwrite("frakc", &Config::frakc)
      .def_readwrite("strategy", &Config::strategy)
      .def_readwrite("fixed_delta", &Config::fixed_delta)
      .def_readwrite("delta_formula", &Config::delta_formula)
      .def_readwrite("c_delta", &Config::c_delta)
      .def_readwrite("visibility_floor_enabled", &Config::visibility_floor_enabled)
      .def_readwrite("seed", &Config::seed)
      .def_readwrite("hash_seed", &Config::hash_seed)
      .def_readwrite("server_id", &Config::server_id)
      .def_readwrite("fairness_c", &Config::fairness_c)
      .def_readwrite("weak_beta", &Config::weak_beta)
      .def_readwrite("mu", &Config::mu)
      .def_property_readonly("one", &Config::one)
      .def_property_readonly("phat_numerator", &Config::phat_numerator)
      .def("validate", &Config::validate);

  // Arithmetic on numerators over 2^{bW}.
  m.def("prob_from_numerator", [](std::uint64_t num, const Config& c) { return prob_from_numerator(num, c).numerator(); });
  m.def(
      "average_with_residue",
      [](const std::vector<std::uint64_t>& nums, std::uint64_t seed) {
        Rng rng(seed);
        return to_nums(average_with_residue(to_probs(nums), rng));
      },
      py::arg("numerators"), py::arg("seed") = 1);
  m.def("decrease", [](std::uint64_t num, std::uint32_t sigma) { return decrease(Prob(num), sigma).numerator(); });
  m.def("apply_visibility_floor",
        [](std::uint64_t num, std::uint64_t c0, const Config& c) { return apply_visibility_floor(Prob(num), c0, c).numerator(); });
  m.def("approx_decision", [](std::uint64_t X, std::uint64_t window, const Rational& L, const Rational& R) {
    return std::string(to_string(approx_decision(X, window, L, R)));
  });
  m.def("delta_analytic", &delta_analytic);
  m.def("deletion_threshold", &deletion_threshold);

  py::class_<EstimatorTable>(m, "EstimatorTable")
      .def(py::init<>())
      .def_static("from_head", &EstimatorTable::from_head)
      .def_property_readonly("heads", &table_heads)
      .def_property_readonly("timestamps", &table_times)
      .def_property_readonly("head", &EstimatorTable::head)
      .def("well_formed", &EstimatorTable::well_formed)
      .def("observe_distance", [](EstimatorTable& t, std::uint64_t d) { strategy2_observe_distance(t, d); })
      .def("tick", [](EstimatorTable& t, const Config& c) { return strategy2_tick(t, c); })
      .def("memory_bits", [](const EstimatorTable& t, const Rational& frakc) { return table_memory_bits(t, frakc); });

  py::class_<World>(m, "World")
      .def_static("create", &World::create)
      .def_static(
          "from_scenario", [](const Config& c, const std::string& scenario) { return make_world(c, Scenario::parse(scenario)); },
          py::arg("config"), py::arg("scenario"))
      .def_readonly("config", &World::cfg)
      .def_readonly("round", &World::round)
      .def_readwrite("suppress_replies", &World::suppress_replies)
      .def_property(
          "numerators", &numerators,
          [](World& w, const std::vector<std::uint64_t>& nums) {
            if (nums.size() != w.clients.size()) throw PreconditionViolated("one numerator per client");
            for (std::size_t i = 0; i < nums.size(); ++i) w.clients[i].p = prob_from_numerator(nums[i], w.cfg);
          })
      .def_property_readonly("window", [](const World& w) { return w.server.window; })
      .def_property_readonly("delta", [](const World& w) { return w.server.delta; })
      .def_property_readonly("X", [](const World& w) { return w.server.X; })
      .def_property_readonly("flag", [](const World& w) { return static_cast<int>(w.server.flag); })
      .def_property_readonly("table",
                             [](const World& w) -> py::object {
                               if (const auto* s2 = std::get_if<Strategy2State>(&w.server.estimator)) return py::cast(s2->table);
                               return py::none();
                             })
      .def("step", [](World& w) { return outcome_dict(step(w)); })
      .def(
          "run",
          [](World& w, const std::string& stop, std::uint64_t max_rounds) {
            RunOptions ro;
            ro.max_rounds = max_rounds;
            ro.thin = 0;
            const RunResult r = run(w, stop_rule(stop), ro);
            py::dict d;
            d["rounds"] = r.rounds_executed;
            d["stopped"] = r.stopped;
            return d;
          },
          py::arg("stop") = "legitimate", py::arg("max_rounds") = 1'000'000)
      .def("snapshot", [](const World& w) { return snapshot_dict(snapshot(w)); })
      .def("is_busy", &is_busy)
      .def("is_fair", &is_fair, py::arg("c") = 1)
      .def("is_weakly_fair", &is_weakly_fair)
      .def("is_stable", &is_stable)
      .def("is_legitimate", &is_legitimate)
      .def("is_safe", &is_safe);

  m.def(
      "measure_convergence",
      [](const Config& c, const std::string& scenario, const std::vector<std::uint64_t>& seeds, std::uint64_t max_rounds,
         const std::string& target, unsigned jobs) {
        MeasureOptions mo;
        mo.max_rounds = max_rounds;
        mo.jobs = jobs;
        if (target == "busy") {
          mo.target = ConvergenceTarget::Busy;
        } else if (target != "legitimate") {
          throw ConfigError("unknown target '" + target + "'");
        }
        ConvergenceReport rep;
        {
          py::gil_scoped_release release;
          rep = measure_convergence(c, Scenario::parse(scenario), seeds, mo);
        }
        py::list out;
        for (const ConvergenceTrial& t : rep.trials) {
          py::dict d;
          d["seed"] = t.seed;
          d["rounds"] = t.rounds;
          d["censored"] = t.censored;
          d["touched"] = t.touched;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("scenario"), py::arg("seeds"), py::arg("max_rounds") = 1'000'000,
      py::arg("target") = "legitimate", py::arg("jobs") = 1);

  m.def(
      "measure_holding",
      [](const Config& c, const std::vector<std::uint64_t>& seeds, std::uint64_t max_rounds, unsigned jobs) {
        MeasureOptions mo;
        mo.max_rounds = max_rounds;
        mo.jobs = jobs;
        HoldingReport rep;
        {
          py::gil_scoped_release release;
          rep = measure_holding(c, seeds, mo);
        }
        py::list out;
        for (const HoldingTrial& t : rep.trials) {
          py::dict d;
          d["seed"] = t.seed;
          d["rounds"] = t.rounds;
          d["censored"] = t.censored;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("seeds"), py::arg("max_rounds") = 100'000, py::arg("jobs") = 1);

  m.def(
      "verify",
      [](std::int64_t square_range, std::uint64_t ping_trials, bool inject_fault) {
        VerifyBounds b;
        b.square_range = square_range;
        b.ping_trials = ping_trials;
        b.inject_fault = inject_fault;
        py::list out;
        for (const Report& r : verify_all(b)) {
          py::dict d;
          d["name"] = r.name;
          d["cases"] = r.cases;
          d["violations"] = r.violations;
          d["examples"] = r.examples;
          out.append(d);
        }
        return out;
      },
      py::arg("square_range") = 200, py::arg("ping_trials") = 1'000'000, py::arg("inject_fault") = false);
}

#include <algorithm>
#include <functional>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bbmlab/cluster.hpp"
#include "bbmlab/ergodic.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/io.hpp"
#include "bbmlab/kpp.hpp"
#include "bbmlab/test_function.hpp"

namespace py = pybind11;
using namespace bbm;

namespace {

SimConfig make_sim_config(std::uint64_t seed, std::uint64_t replica, double horizon,
                          double dt, const std::vector<double>& pmf, double prune_gap,
                          double prune_after) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.replica = replica;
  cfg.horizon = horizon;
  cfg.checkpoints = SimConfig::uniform_checkpoints(horizon, dt);
  cfg.law = BranchingLaw(pmf);
  cfg.prune_gap = prune_gap;
  cfg.prune_after = prune_after;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_bbmlab, m) {
  m.doc() = "branching Brownian motion laboratory core";
  m.attr("__version__") = io::version();

  m.def("recenter_m", &recenter_m, py::arg("t"), "median centering sqrt(2)t - (3/(2 sqrt(2))) log t");
  m.def("tf_library", [] { return TestFunction::library_names(); },
        "ids of the built-in test functions");

  py::class_<TestFunction>(m, "TestFunction")
      .def_static("library", &TestFunction::library, py::arg("name"))
      .def("__call__", &TestFunction::operator(), py::arg("y"))
      .def_property_readonly("id", &TestFunction::id)
      .def_property_readonly("delta", &TestFunction::delta);

  py::class_<PointMeasure>(m, "PointMeasure")
      .def_property_readonly("atoms", [](const PointMeasure& mu) { return mu.atoms; })
      .def("__len__", &PointMeasure::size)
      .def("max", &PointMeasure::max)
      .def("count_in", &PointMeasure::count_in, py::arg("lo"), py::arg("hi"));

  py::class_<GenealogyForest>(m, "Forest")
      .def("__len__", &GenealogyForest::size)
      .def("checkpoint_times", &GenealogyForest::checkpoint_times)
      .def("n_alive",
           [](const GenealogyForest& f, double t) {
             return f.n_alive(f.checkpoint_index(t));
           },
           py::arg("t"))
      .def("max",
           [](const GenealogyForest& f, double t) {
             return f.alive_positions(t).max();
           },
           py::arg("t"))
      .def("positions",
           [](const GenealogyForest& f, double t) { return f.alive_positions(t).atoms; },
           py::arg("t"))
      .def("extremal_atoms",
           [](const GenealogyForest& f, double t) {
             auto atoms = extremal_process(f, t).atoms;
             std::sort(atoms.begin(), atoms.end(), std::greater<>());
             return atoms;
           },
           py::arg("t"), "positions recentred by m(t), descending")
      .def("martingales",
           [](const GenealogyForest& f, double t) {
             const MartingalePair p = martingales(f, t);
             return py::make_tuple(p.Y, p.Z);
           },
           py::arg("t"), "(Y, Z) at the checkpoint closest-matching t")
      .def("save", [](const GenealogyForest& f, const std::string& path) {
        io::save_forest(f, path);
      });

  m.def(
      "simulate",
      [](std::uint64_t seed, std::uint64_t replica, double horizon, double dt,
         const std::vector<double>& pmf, double prune_gap, double prune_after) {
        return simulate(
            make_sim_config(seed, replica, horizon, dt, pmf, prune_gap, prune_after));
      },
      py::arg("seed") = 1, py::arg("replica") = 0, py::arg("horizon") = 5.0,
      py::arg("dt") = 0.25, py::arg("pmf") = std::vector<double>{0.0, 1.0},
      py::arg("prune_gap") = 0.0, py::arg("prune_after") = 0.0);

  m.def("load_forest", &io::load_forest, py::arg("path"));

  m.def(
      "kpp_c",
      [](const std::string& tf, double r, const std::vector<double>& pmf) {
        const CEstimate c =
            compute_C_kpp(TestFunction::library(tf), r, 28.0, BranchingLaw(pmf));
        return c.value;
      },
      py::arg("tf"), py::arg("r") = 12.0, py::arg("pmf") = std::vector<double>{0.0, 1.0},
      "equation-route tail constant at horizon r");

  m.def(
      "bramson_front",
      [](double t, double dx, double dt) {
        kpp::SolverConfig cfg;
        cfg.dx = dx;
        cfg.dt = dt;
        cfg.moving_window = true;
        auto sol = kpp::init_heaviside(cfg);
        const auto trace = kpp::trace_front(sol, t, 1.0);
        const auto fit = kpp::bramson_fit(trace, t / 2.0, t);
        return py::make_tuple(fit.speed, fit.log_coef);
      },
      py::arg("t") = 100.0, py::arg("dx") = 0.05, py::arg("dt") = 0.025,
      "(speed, log coefficient) of the half-level front");

  m.def(
      "cluster_pool",
      [](std::size_t n, double t_d, std::uint64_t seed, const std::vector<double>& pmf) {
        const auto pool = sample_cluster_pool(n, t_d, BranchingLaw(pmf), seed);
        std::vector<std::vector<double>> atoms;
        atoms.reserve(pool.size());
        for (const auto& c : pool) atoms.push_back(c.atoms.atoms);
        return atoms;
      },
      py::arg("n") = 100, py::arg("t_d") = 4.0, py::arg("seed") = 1,
      py::arg("pmf") = std::vector<double>{0.0, 1.0},
      "conditioned decoration samples, atoms relative to their max");

  m.def(
      "cluster_integral",
      [](const std::string& tf, std::size_t n, double t_d, std::uint64_t seed,
         const std::vector<double>& pmf) {
        const auto pool = sample_cluster_pool(n, t_d, BranchingLaw(pmf), seed);
        const auto integral = C_from_clusters(TestFunction::library(tf), pool);
        return py::make_tuple(integral.value, integral.se);
      },
      py::arg("tf"), py::arg("n") = 1000, py::arg("t_d") = 4.0, py::arg("seed") = 1,
      py::arg("pmf") = std::vector<double>{0.0, 1.0},
      "(value, se) of the normalised cluster-route integral");

  m.def(
      "ergodic_gap",
      [](const std::string& tf, double T, std::uint64_t seed) {
        ErgodicConfig cfg;
        cfg.T = T;
        cfg.seed = seed;
        const ErgodicReport r = run_time_average(cfg, TestFunction::library(tf));
        return py::make_tuple(r.avg.value, r.analytic_value, r.abs_gap);
      },
      py::arg("tf") = "bump1", py::arg("T") = 20.0, py::arg("seed") = 1,
      "(time average, analytic value, absolute gap) for one path");
}

#include "chanhom/config.hpp"
#include "chanhom/errors.hpp"
#include "chanhom/study.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

namespace py = pybind11;
using namespace chanhom;

namespace {

py::dict row_dict(const ReportRow& r) {
  py::dict d;
  d["eps"] = r.eps;
  d["E_chan"] = r.e_chan;
  d["E_bulk_plus"] = r.e_bulk_plus;
  d["E_bulk_minus"] = r.e_bulk_minus;
  d["E_N"] = r.e_n;
  d["apriori_norm"] = r.apriori_norm;
  d["shift_ratio"] = r.shift_ratio;
  return d;
}

}  // namespace

PYBIND11_MODULE(_chanhom, m) {
  m.doc() = "Micro/macro simulator for reaction-diffusion through a thin channel layer";

  static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
  static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical, e.what());
    }
  });

  py::class_<StudyConfig>(m, "StudyConfig")
      .def_readwrite("name", &StudyConfig::name)
      .def_readwrite("final_time", &StudyConfig::final_time)
      .def_readwrite("out_dir", &StudyConfig::out_dir)
      .def_readwrite("seed", &StudyConfig::seed)
      .def_readonly("k", &StudyConfig::k)
      .def_readonly("m", &StudyConfig::m)
      .def_readonly("sigma_nodes", &StudyConfig::sigma_nodes)
      .def_property_readonly("epsilon",
                             [](const StudyConfig& c) {
                               std::vector<double> out;
                               for (const auto& e : c.epsilon) out.push_back(to_double(e));
                               return out;
                             })
      .def("dt", &StudyConfig::dt)
      .def("echo", [](const StudyConfig& c) { return config_echo(c); });

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); }, py::arg("path"));
  m.def("benchmark_b1", &benchmark_b1);

  m.def(
      "run_study",
      [](const StudyConfig& cfg, std::optional<std::filesystem::path> out, unsigned threads, bool write) {
        RunOptions opts;
        opts.out_dir = std::move(out);
        opts.threads = threads;
        opts.write = write;
        StudyReport rep;
        {
          py::gil_scoped_release release;
          rep = run_study(cfg, opts);
        }
        py::list rows;
        for (const auto& r : rep.rows) rows.append(row_dict(r));
        return rows;
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("threads") = 1, py::arg("write") = true,
      "Runs the eps sweep and the macro problem; returns the report rows as dicts.");

  m.def(
      "verify_operators",
      [](const StudyConfig& cfg) {
        py::list out;
        for (const auto& c : verify_operators(cfg)) {
          py::dict d;
          d["eps"] = c.eps;
          d["fields"] = c.fields;
          d["max_residual"] = c.worst.max();
          out.append(d);
        }
        return out;
      },
      py::arg("config"));

  m.def(
      "rederive_report",
      [](const std::filesystem::path& dir) {
        const auto r = rederive_report(dir);
        return py::make_tuple(r.csv, r.matches);
      },
      py::arg("dir"));

  m.def("sha256_file", [](const std::filesystem::path& p) { return sha256_file(p); }, py::arg("path"));
  m.attr("__version__") = version_string();
}

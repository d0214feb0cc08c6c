#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/event_log.hpp"
#include "shrimpmorph/kv_config.hpp"
#include "shrimpmorph/metrics.hpp"
#include "shrimpmorph/pose_net.hpp"
#include "shrimpmorph/synth.hpp"
#include "shrimpmorph/unit_regression.hpp"

namespace py = pybind11;
using namespace shrimpmorph;

namespace {

py::array_t<std::uint8_t> rgb_array(const RgbdRaster& r) {
  py::array_t<std::uint8_t> out({r.height, r.width, 3});
  std::copy(r.rgb.begin(), r.rgb.end(), out.mutable_data());
  return out;
}

py::array_t<float> depth_array(const RgbdRaster& r) {
  py::array_t<float> out({r.height, r.width});
  std::copy(r.depth.begin(), r.depth.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "shrimpmorph core bindings";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<View>(m, "View").value("Lateral", View::Lateral).value("Dorsal", View::Dorsal);
  py::enum_<RostrumState>(m, "RostrumState")
      .value("Intact", RostrumState::Intact)
      .value("Broken", RostrumState::Broken);
  py::enum_<AssessmentKind>(m, "AssessmentKind")
      .value("Pose", AssessmentKind::Pose)
      .value("Rostrum", AssessmentKind::Rostrum);

  py::class_<Keypoint>(m, "Keypoint")
      .def(py::init<int, double, double, bool>(), py::arg("index"), py::arg("x"), py::arg("y"),
           py::arg("visible") = true)
      .def_readwrite("index", &Keypoint::index)
      .def_readwrite("x", &Keypoint::x)
      .def_readwrite("y", &Keypoint::y)
      .def_readwrite("visible", &Keypoint::visible)
      .def("__repr__", [](const Keypoint& k) {
        return "Keypoint(" + std::to_string(k.index) + ", " + std::to_string(k.x) + ", " +
               std::to_string(k.y) + ")";
      });

  py::class_<VirtualSkeleton>(m, "VirtualSkeleton")
      .def(py::init<>())
      .def_readwrite("view", &VirtualSkeleton::view)
      .def_readwrite("rostrum", &VirtualSkeleton::rostrum)
      .def_readwrite("keypoints", &VirtualSkeleton::keypoints)
      .def("__eq__", [](const VirtualSkeleton& a, const VirtualSkeleton& b) { return a == b; });

  m.def("validate_skeleton", &validate_skeleton);
  m.def("pixel_measurements", [](const VirtualSkeleton& s) {
    return extract_pixel_measurements(s).values();
  });
  m.def("variable_names", &variable_names);

  py::class_<SampleRecord>(m, "Sample")
      .def_readonly("sample_id", &SampleRecord::sample_id)
      .def_readonly("specimen_id", &SampleRecord::specimen_id)
      .def_readonly("rotation_deg", &SampleRecord::rotation_deg)
      .def_readonly("gt_view", &SampleRecord::gt_view)
      .def_readonly("gt_rostrum", &SampleRecord::gt_rostrum)
      .def_readonly("human_view", &SampleRecord::human_view)
      .def_readonly("human_rostrum", &SampleRecord::human_rostrum)
      .def_readonly("gt_skeleton", &SampleRecord::gt_skeleton)
      .def_property_readonly("gt_measurements_cm",
                             [](const SampleRecord& s) -> std::optional<std::map<std::string, double>> {
                               if (!s.gt_measurements_cm) return std::nullopt;
                               return s.gt_measurements_cm->values();
                             })
      .def_property_readonly("rgb", [](const SampleRecord& s) { return rgb_array(s.raster); })
      .def_property_readonly("depth", [](const SampleRecord& s) { return depth_array(s.raster); });

  m.def(
      "generate_corpus",
      [](std::size_t n, std::uint64_t seed, double view_mix, double rostrum_break_prob) {
        SynthParams p;
        p.seed = seed;
        p.view_mix = view_mix;
        p.rostrum_break_prob = rostrum_break_prob;
        return generate_corpus(p, n);
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("view_mix") = SynthParams{}.view_mix,
      py::arg("rostrum_break_prob") = SynthParams{}.rostrum_break_prob);

  m.def("epe", &epe);
  m.def("pck", &pck, py::arg("preds"), py::arg("gts"), py::arg("threshold_px") = 10.0);
  m.def(
      "oks",
      [](const VirtualSkeleton& p, const VirtualSkeleton& g, double k) {
        return oks(p, g, OksParams::uniform(k));
      },
      py::arg("pred"), py::arg("gt"), py::arg("k") = 0.05);
  m.def("map_50_95", py::overload_cast<const std::vector<double>&>(&map_50_95), py::arg("oks_values"));

  py::class_<RegressionModel>(m, "RegressionModel")
      .def_readonly("variable", &RegressionModel::variable)
      .def_readonly("alpha", &RegressionModel::alpha)
      .def_readonly("beta", &RegressionModel::beta)
      .def_readonly("n_train", &RegressionModel::n_train)
      .def("predict", &RegressionModel::predict);
  m.def(
      "fit_svr",
      [](const std::string& variable, const std::vector<CalibrationPair>& pairs, double epsilon, double c) {
        return fit_svr(variable, pairs, {epsilon, c});
      },
      py::arg("variable"), py::arg("pairs"), py::arg("epsilon") = SvrHyper{}.epsilon,
      py::arg("c") = SvrHyper{}.c);
  m.def("fit_least_squares", &fit_least_squares);

  py::class_<PoseNetConfig>(m, "PoseNetConfig")
      .def_static("desk", &PoseNetConfig::desk)
      .def_static("tiny", &PoseNetConfig::tiny)
      .def_static("full", &PoseNetConfig::full)
      .def_readwrite("input_height", &PoseNetConfig::input_height)
      .def_readwrite("input_width", &PoseNetConfig::input_width)
      .def_readwrite("patch_size", &PoseNetConfig::patch_size)
      .def_readwrite("embed_dim", &PoseNetConfig::embed_dim)
      .def_readwrite("num_layers", &PoseNetConfig::num_layers)
      .def_readwrite("num_keypoints", &PoseNetConfig::num_keypoints)
      .def("output_shape", [](const PoseNetConfig& c) {
        const auto s = output_shape(c);
        return py::make_tuple(s.height, s.width, s.num_maps);
      });
  m.def("decode_round_trip", [](const VirtualSkeleton& skel) {
    PoseNetConfig c = PoseNetConfig::desk();
    c.num_keypoints = keypoint_count(skel.rostrum);
    return extract_keypoints(gaussian_target(skel, c), variant_of(skel));
  });

  m.def("parse_kv_config", [](const std::string& text) { return parse_kv_config(text).values(); });
  m.def("replay_store", [](const std::filesystem::path& path) {
    const auto replay = replay_log(path);
    return py::make_tuple(replay.state.results.size(), replay.state.alerts.size(), replay.warnings);
  });
}

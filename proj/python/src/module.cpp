#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "nsn/apps.hpp"
#include "nsn/dataset.hpp"
#include "nsn/error.hpp"
#include "nsn/generation.hpp"
#include "nsn/model_io.hpp"
#include "nsn/network.hpp"
#include "nsn/preprocess.hpp"
#include "nsn/training.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// (H, W) or (H, W, C) array to a tensor.
nsn::Tensor3 to_tensor(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw nsn::ShapeError("expected an (H, W) or (H, W, C) array");
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    const auto c = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
    return {nsn::Shape3{h, w, c}, std::vector<double>(a.data(), a.data() + a.size())};
}

/// (N, H, W) or (N, H, W, C) array to tensors.
std::vector<nsn::Tensor3> to_tensors(const Array& a) {
    if (a.ndim() != 3 && a.ndim() != 4) throw nsn::ShapeError("expected an (N, H, W) or (N, H, W, C) array");
    const nsn::Shape3 shape{static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(2)),
                            a.ndim() == 4 ? static_cast<std::size_t>(a.shape(3)) : 1};
    std::vector<nsn::Tensor3> out;
    out.reserve(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        const double* p = a.data() + i * static_cast<py::ssize_t>(shape.size());
        out.emplace_back(shape, std::vector<double>(p, p + shape.size()));
    }
    return out;
}

py::array_t<double> to_array(const nsn::Tensor3& t) {
    py::array_t<double> a({t.height(), t.width(), t.channels()});
    const auto v = t.data();
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

py::array_t<double> to_array(const std::vector<nsn::Tensor3>& ts) {
    const nsn::Shape3 s = ts.empty() ? nsn::Shape3{} : ts.front().shape();
    py::array_t<double> a({ts.size(), s.height, s.width, s.channels});
    double* out = a.mutable_data();
    for (const auto& t : ts) out = std::copy(t.data().begin(), t.data().end(), out);
    return a;
}

std::vector<nsn::LayerSpec> arch_from(const std::string& text) {
    if (text == "mnist") return nsn::mnist_architecture();
    if (text == "64") return nsn::architecture_64();
    return nsn::parse_architecture(text);
}

template <class T>
std::vector<T> broadcast(const std::vector<T>& v, std::size_t depth, const char* name) {
    if (v.size() == 1) return std::vector<T>(depth, v.front());
    if (v.size() != depth) throw std::invalid_argument(std::string(name) + " needs 1 or one value per layer");
    return v;
}

}  // namespace

PYBIND11_MODULE(_nsn, m) {
    m.doc() = "Normal similarity networks: non-parametric Gaussian filter banks and backward sampling";

    py::register_exception<nsn::ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<nsn::FormatError>(m, "FormatError", PyExc_RuntimeError);

    py::class_<nsn::GenConfig>(m, "GenConfig")
        .def(py::init([](double delta1, double delta2, double delta3, std::size_t n, std::uint64_t seed,
                         bool redraw_per_cell) {
                 nsn::GenConfig c{delta1, delta2, delta3, n, seed, redraw_per_cell};
                 c.validate();
                 return c;
             }),
             py::arg("delta1") = 1.0, py::arg("delta2") = 1.0, py::arg("delta3") = 1.0, py::arg("n") = 10,
             py::arg("seed") = 0, py::arg("redraw_per_cell") = false)
        .def_readwrite("delta1", &nsn::GenConfig::delta1)
        .def_readwrite("delta2", &nsn::GenConfig::delta2)
        .def_readwrite("delta3", &nsn::GenConfig::delta3)
        .def_readwrite("n", &nsn::GenConfig::n)
        .def_readwrite("seed", &nsn::GenConfig::seed)
        .def_readwrite("redraw_per_cell", &nsn::GenConfig::redraw_per_cell)
        .def("__repr__", [](const nsn::GenConfig& c) {
            return "GenConfig(delta1=" + std::to_string(c.delta1) + ", delta2=" + std::to_string(c.delta2) +
                   ", delta3=" + std::to_string(c.delta3) + ", n=" + std::to_string(c.n) +
                   ", seed=" + std::to_string(c.seed) + ")";
        });

    py::class_<nsn::Network>(m, "Network")
        .def_static("load", &nsn::load_model, py::arg("path"))
        .def_static("from_bytes",
                    [](const py::bytes& b) {
                        const std::string s = b;
                        return nsn::deserialize_model(std::vector<std::uint8_t>(s.begin(), s.end()));
                    })
        .def("save", [](const nsn::Network& n, const std::filesystem::path& p) { nsn::save_model(n, p); })
        .def("to_bytes",
             [](const nsn::Network& n) {
                 const auto v = nsn::serialize_model(n);
                 return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
             })
        .def_property_readonly("input_shape",
                               [](const nsn::Network& n) {
                                   return py::make_tuple(n.input_shape.height, n.input_shape.width,
                                                         n.input_shape.channels);
                               })
        .def_property_readonly("depth", &nsn::Network::depth)
        .def_property_readonly("architecture",
                               [](const nsn::Network& n) { return nsn::format_architecture(n.architecture()); })
        .def_property_readonly("filter_counts",
                               [](const nsn::Network& n) {
                                   std::vector<std::size_t> c;
                                   for (const auto& l : n.layers) c.push_back(l.bank.size());
                                   return c;
                               })
        .def_property_readonly("alphas",
                               [](const nsn::Network& n) {
                                   std::vector<double> a;
                                   for (const auto& l : n.layers) a.push_back(l.alpha);
                                   return a;
                               })
        .def_property_readonly("preprocessing", [](const nsn::Network& n) { return nsn::to_string(n.preprocessing.kind); })
        .def_property_readonly("mean_image", [](const nsn::Network& n) { return to_array(n.mean_image); })
        .def_readwrite("metadata", &nsn::Network::metadata)
        .def("shape_chain", &nsn::Network::shape_chain)
        .def("__eq__", [](const nsn::Network& a, const nsn::Network& b) { return a == b; });

    m.def("load_idx",
          [](const std::filesystem::path& path, std::size_t limit) { return to_array(nsn::load_idx(path, {}, limit).images); },
          py::arg("path"), py::arg("limit") = 0, "IDX3 images as an (N, H, W, 1) array in [0, 1].");

    m.def(
        "train",
        [](const Array& images, const std::string& arch, std::vector<double> alpha_percentile,
           std::vector<std::size_t> max_filters, std::vector<std::size_t> patch_subsample, std::size_t max_iters,
           std::uint64_t seed, std::size_t threads, const std::string& preprocess, double zca_eps) {
            const auto data = to_tensors(images);
            const auto layers = arch_from(arch);
            nsn::EmConfig base;
            base.seed = seed;
            base.max_iters = max_iters;
            base.threads = threads;
            auto cfgs = nsn::default_layer_configs(layers.size(), base);
            const auto pct = broadcast(alpha_percentile, layers.size(), "alpha_percentile");
            const auto caps = broadcast(max_filters, layers.size(), "max_filters");
            const auto sub = broadcast(patch_subsample, layers.size(), "patch_subsample");
            for (std::size_t k = 0; k < layers.size(); ++k) {
                cfgs[k].alpha_percentile = pct[k];
                cfgs[k].max_filters = caps[k];
                cfgs[k].patch_subsample = sub[k];
            }
            nsn::TrainOptions opts;
            opts.threads = threads;
            if (preprocess == "normalize") opts.preprocessing = nsn::Preprocessing::fit_normalize(data);
            else if (preprocess == "zca") opts.preprocessing = nsn::Preprocessing::whitening(nsn::fit_zca(data, zca_eps));
            else if (preprocess != "none") throw std::invalid_argument("preprocess must be none, normalize or zca");
            py::gil_scoped_release release;
            return nsn::train_network(data, layers, cfgs, opts);
        },
        py::arg("images"), py::arg("arch") = "mnist", py::arg("alpha_percentile") = std::vector<double>{20.0, 5.0, 5.0},
        py::arg("max_filters") = std::vector<std::size_t>{200}, py::arg("patch_subsample") = std::vector<std::size_t>{64, 16, 0},
        py::arg("max_iters") = 20, py::arg("seed") = 0, py::arg("threads") = 1, py::arg("preprocess") = "none",
        py::arg("zca_eps") = 1e-2);

    m.def("forward",
          [](const nsn::Network& net, const Array& image) {
              py::list maps;
              for (const auto& t : nsn::encode(net, to_tensor(image))) maps.append(to_array(t));
              return maps;
          },
          py::arg("net"), py::arg("image"), "Feature maps of every layer for a raw [0, 1] image.");

    m.def("generate",
          [](const nsn::Network& net, std::size_t count, const nsn::GenConfig& cfg) {
              return to_array(nsn::generate_batch(net, count, cfg));
          },
          py::arg("net"), py::arg("count"), py::arg("config") = nsn::GenConfig{});

    m.def("style",
          [](const nsn::Network& net, const Array& image, std::size_t variants, const nsn::GenConfig& cfg) {
              return to_array(nsn::style_variants(net, to_tensor(image), variants, cfg));
          },
          py::arg("net"), py::arg("image"), py::arg("variants") = 4, py::arg("config") = nsn::GenConfig{});

    m.def(
        "inpaint",
        [](const nsn::Network& net, const Array& image, const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
           const nsn::GenConfig& cfg, bool full) {
            if (mask.ndim() != 2) throw nsn::ShapeError("mask must be a 2-D boolean array");
            nsn::OcclusionMask om{static_cast<std::size_t>(mask.shape(0)), static_cast<std::size_t>(mask.shape(1)),
                                  std::vector<bool>(mask.data(), mask.data() + mask.size())};
            nsn::Rng rng(cfg.seed);
            const auto res = nsn::inpaint(net, to_tensor(image), om, cfg, rng,
                                          full ? nsn::InpaintMode::full : nsn::InpaintMode::occluded_cells);
            py::dict d;
            d["image"] = to_array(res.image);
            d["first_map"] = to_array(res.first_map);
            d["regenerated_map"] = to_array(res.regenerated_map);
            d["modified_map"] = to_array(res.modified_map);
            d["replaced_cells"] = res.replaced_cells;
            return d;
        },
        py::arg("net"), py::arg("image"), py::arg("mask"), py::arg("config") = nsn::GenConfig{}, py::arg("full") = false);

    m.def("interpolate",
          [](const nsn::Network& net, std::size_t a, std::size_t b, std::size_t steps, const nsn::GenConfig& cfg) {
              return to_array(nsn::interpolation_strip(net, a, b, steps, cfg));
          },
          py::arg("net"), py::arg("a"), py::arg("b"), py::arg("steps") = 8, py::arg("config") = nsn::GenConfig{});

    m.def("arith",
          [](const nsn::Network& net, const std::string& expr, std::size_t samples, const nsn::GenConfig& cfg) {
              return to_array(nsn::arithmetic_rows(net, nsn::parse_filter_expression(expr), samples, cfg));
          },
          py::arg("net"), py::arg("expression"), py::arg("samples") = 4, py::arg("config") = nsn::GenConfig{});

    m.def("parse_filter_expression", [](const std::string& text) {
        const auto e = nsn::parse_filter_expression(text);
        return py::make_tuple(e.indices, e.coeffs);
    });

    m.def("sample_layer",
          [](const nsn::Network& net, std::size_t layer, std::size_t count, const nsn::GenConfig& cfg) {
              return to_array(nsn::sample_layer_batch(net, layer, count, cfg));
          },
          py::arg("net"), py::arg("layer"), py::arg("count") = 16, py::arg("config") = nsn::GenConfig{});

    m.def("weight_vector",
          [](const std::vector<double>& v, const nsn::GenConfig& cfg) {
              nsn::Rng rng(cfg.seed);
              return nsn::weight_vector(v, cfg, rng);
          },
          py::arg("v"), py::arg("config") = nsn::GenConfig{});

    m.def("tile_grid",
          [](const Array& images, std::size_t cols) {
              const auto ts = to_tensors(images);
              return to_array(nsn::tile_grid(ts, cols == 0 ? nsn::default_grid_cols(ts.size()) : cols));
          },
          py::arg("images"), py::arg("cols") = 0);

    m.def("write_image", [](const std::filesystem::path& path, const Array& image) { nsn::write_image(path, to_tensor(image)); },
          py::arg("path"), py::arg("image"));
}

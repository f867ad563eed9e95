// Python bindings for the core operations: preprocessing, distance
// baselines, evaluation metrics, and the Siamese embedding network.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agfv/pipeline.hpp"

namespace py = pybind11;
using namespace agfv;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

Orientation parse_orientation(const std::string& s) {
    if (s == "distance") return Orientation::Distance;
    if (s == "similarity") return Orientation::Similarity;
    throw UsageError("orientation must be 'distance' or 'similarity', got '" + s + "'");
}

EmbeddingVector emb(const py::array_t<double>& a) {
    Tensor t = tensor_from_array(a);
    return EmbeddingVector{Tensor::from_vector(t.values()), false};
}

/// Thin wrapper holding a verification network and its parameters.
struct PyNetwork {
    SiameseConfig cfg;
    ModelParams params;

    PyNetwork(std::size_t inject_width, std::uint64_t seed) : cfg(SiameseConfig::desk32(inject_width)) {
        Rng rng(seed);
        params = init_params(cfg.base, rng);
    }

    py::array_t<double> embed(const py::array_t<double>& face) {
        Tensor x = tensor_from_array(face);
        if (x.rank() == 2) x = Tensor({1, x.dim(0), x.dim(1)}, x.values());
        ForwardTrace t = forward(cfg.base, params, x, RunMode::Eval);
        return array_from_tensor(t.output);
    }

    double distance(const py::array_t<double>& a, const py::array_t<double>& b) {
        Tensor ta = tensor_from_array(a), tb = tensor_from_array(b);
        if (ta.rank() == 2) ta = Tensor({1, ta.dim(0), ta.dim(1)}, ta.values());
        if (tb.rank() == 2) tb = Tensor({1, tb.dim(0), tb.dim(1)}, tb.values());
        return siamese_distance(ta, tb, nullptr, params, cfg, nullptr);
    }
};

}  // namespace

PYBIND11_MODULE(_agfv, m) {
    m.doc() = "age-gap face verification core operations";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("l2_normalize",
          [](const py::array_t<double>& v) {
              return array_from_tensor(l2_normalize(tensor_from_array(v)));
          },
          py::arg("v"), "L2-normalize a vector (zero vectors stay zero)");

    m.def("euclidean", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return euclidean(emb(a), emb(b));
    });
    m.def("l2norm_euclidean", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return l2norm_euclidean(emb(a), emb(b));
    });
    m.def("hellinger", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return hellinger(emb(a), emb(b));
    });
    m.def("cosine", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return cosine(emb(a), emb(b));
    });

    m.def("contrastive_loss",
          [](double distance, int label, double margin) {
              ContrastiveResult r = contrastive_loss(distance, label, margin);
              return py::make_tuple(r.loss, r.d_loss_d_distance);
          },
          py::arg("distance"), py::arg("label"), py::arg("margin") = 1.0,
          "Returns (loss, dloss/ddistance)");

    m.def("accuracy",
          [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold,
             const std::string& orientation) {
              return accuracy(scores, labels, threshold, parse_orientation(orientation));
          },
          py::arg("scores"), py::arg("labels"), py::arg("threshold"),
          py::arg("orientation") = "distance");

    m.def("roc",
          [](const std::vector<double>& scores, const std::vector<int>& labels,
             const std::string& orientation) {
              RocResult r = roc(scores, labels, parse_orientation(orientation));
              std::vector<double> fpr, tpr, thr;
              for (const RocPoint& p : r.points) {
                  fpr.push_back(p.fpr);
                  tpr.push_back(p.tpr);
                  thr.push_back(p.threshold);
              }
              py::dict out;
              out["fpr"] = fpr;
              out["tpr"] = tpr;
              out["threshold"] = thr;
              out["auc"] = r.auc;
              return out;
          },
          py::arg("scores"), py::arg("labels"), py::arg("orientation") = "similarity");

    m.def("align_face",
          [](const py::array_t<double>& gray, std::pair<double, double> eye_left,
             std::pair<double, double> eye_right, std::size_t side) {
              Tensor g = tensor_from_array(gray);
              EyePair eyes{{eye_left.first, eye_left.second},
                           {eye_right.first, eye_right.second}};
              return array_from_tensor(align(g, eyes, side).pixels);
          },
          py::arg("gray"), py::arg("eye_left"), py::arg("eye_right"), py::arg("side") = 32,
          "Align a grayscale image ([0,1] floats, HxW) by its eye coordinates");

    m.def("generate_synth",
          [](std::size_t identities, std::size_t images_per_identity, double gamma,
             std::uint64_t seed) {
              SynthConfig cfg;
              cfg.identity_count = identities;
              cfg.images_per_identity = images_per_identity;
              cfg.age_gap_strength = gamma;
              Rng rng(seed);
              SynthDataset d = synth_generate(cfg, rng);
              py::list records;
              for (std::size_t i = 0; i < d.images.size(); ++i) {
                  const auto& rec = d.manifest.records[i];
                  const auto& img = d.images[i];
                  py::array_t<double> pixels({img.height, img.width});
                  double* out = pixels.mutable_data();
                  for (std::size_t j = 0; j < img.pixels.size(); ++j) {
                      out[j] = img.pixels[j] / 255.0;
                  }
                  py::dict r;
                  r["id"] = rec.id;
                  r["age"] = rec.age;
                  r["eye_l"] = py::make_tuple(rec.eye_l.x, rec.eye_l.y);
                  r["eye_r"] = py::make_tuple(rec.eye_r.x, rec.eye_r.y);
                  r["pixels"] = pixels;
                  records.append(r);
              }
              return records;
          },
          py::arg("identities"), py::arg("images_per_identity"), py::arg("gamma") = 0.5,
          py::arg("seed") = 1, "Generate a synthetic identity dataset");

    py::class_<PyNetwork>(m, "Network",
                          "desk-scale verification network (32x32 grayscale input)")
        .def(py::init<std::size_t, std::uint64_t>(), py::arg("inject_width") = 0,
             py::arg("seed") = 1)
        .def("embed", &PyNetwork::embed, py::arg("face"),
             "L2-normalized embedding of a 32x32 face")
        .def("distance", &PyNetwork::distance, py::arg("face_a"), py::arg("face_b"),
             "Euclidean distance between the two embeddings");
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <string>
#include <vector>

#include "mal/crf.hpp"
#include "mal/errors.hpp"
#include "mal/mil.hpp"
#include "mal/training.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

// Raised for arrays that are not float32.
class DTypeError : public mal::InvalidArgument {
 public:
  using mal::InvalidArgument::InvalidArgument;
};

// Raised for arrays that are not C-contiguous.
class LayoutError : public mal::InvalidArgument {
 public:
  using mal::InvalidArgument::InvalidArgument;
};

void require_float32(const py::array& a, const char* name) {
  if (!a.dtype().is(py::dtype::of<float>())) {
    throw DTypeError(std::string(name) + " must be float32, got " + py::str(a.dtype()).cast<std::string>());
  }
  if (!(a.flags() & py::array::c_style)) throw LayoutError(std::string(name) + " must be C-contiguous");
}

mal::ProbMask to_mask(const py::array& a, const char* name) {
  require_float32(a, name);
  if (a.ndim() != 2) throw mal::DimensionMismatch(std::string(name) + " must have shape (H, W)");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const auto* p = static_cast<const float*>(a.data());
  return mal::ProbMask(w, h, std::vector<double>(p, p + a.size()));
}

mal::Image to_image(const py::array& a, const char* name) {
  require_float32(a, name);
  if (a.ndim() != 2 && a.ndim() != 3) throw mal::DimensionMismatch(std::string(name) + " must have shape (H, W) or (H, W, C)");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  const auto* p = static_cast<const float*>(a.data());
  return mal::Image(w, h, c, std::vector<float>(p, p + a.size()));
}

py::array_t<float> to_array(const mal::ProbMask& m) {
  py::array_t<float> out({m.height(), m.width()});
  float* dst = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = static_cast<float>(m[i]);
  return out;
}

mal::BBox to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

mal::KernelForm parse_form(const std::string& s) {
  if (s == "squared") return mal::KernelForm::kSquared;
  if (s == "absolute") return mal::KernelForm::kAbsolute;
  throw mal::InvalidArgument("kernel_form must be 'squared' or 'absolute', got '" + s + "'");
}

mal::MeanFieldUpdate parse_update(const std::string& s) {
  if (s == "normalized") return mal::MeanFieldUpdate::kNormalized;
  if (s == "clamp") return mal::MeanFieldUpdate::kClamp;
  throw mal::InvalidArgument("update must be 'normalized' or 'clamp', got '" + s + "'");
}

mal::CrfParams iteration_params(int max_iters, double tol, const std::string& update, int threads) {
  mal::CrfParams p;
  p.max_iters = max_iters;
  p.tol = tol;
  p.update = parse_update(update);
  p.threads = threads;
  p.validate();
  return p;
}

void require_same_shape(const mal::ProbMask& m, const mal::PairwiseKernel& k) {
  if (m.width() != k.width() || m.height() != k.height()) {
    throw mal::DimensionMismatch("mask shape does not match the kernel");
  }
}

template <typename E>
void register_error(py::module_& m, const char* name, py::handle base) {
  py::register_exception<E>(m, name, base);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "CRF mean-field, MIL and self-training kernels over float32 arrays.";

  static py::exception<mal::Error> error(m, "Error", PyExc_RuntimeError);
  register_error<mal::InvalidArgument>(m, "InvalidArgument", error);
  register_error<mal::BoundsError>(m, "BoundsError", error);
  register_error<mal::DegenerateBoxError>(m, "DegenerateBoxError", error);
  register_error<mal::DimensionMismatch>(m, "DimensionMismatch", error);
  register_error<mal::NoNegativeBagsError>(m, "NoNegativeBagsError", error);
  register_error<mal::UndefinedDiceError>(m, "UndefinedDiceError", error);
  register_error<mal::NormalizationError>(m, "NormalizationError", error);
  register_error<mal::NonFiniteError>(m, "NonFiniteError", error);
  register_error<DTypeError>(m, "DTypeError", m.attr("InvalidArgument"));
  register_error<LayoutError>(m, "LayoutError", m.attr("InvalidArgument"));

  py::class_<mal::PairwiseKernel>(m, "PairwiseKernel")
      .def_property_readonly("width", &mal::PairwiseKernel::width)
      .def_property_readonly("height", &mal::PairwiseKernel::height)
      .def_property_readonly("pixel_count", &mal::PairwiseKernel::pixel_count)
      .def("weight", &mal::PairwiseKernel::weight, "i"_a, "j"_a, "Affinity between flat pixel indices i and j.")
      .def(
          "csr",
          [](const mal::PairwiseKernel& k) {
            std::vector<std::uint32_t> offsets{0};
            std::vector<std::uint32_t> nbrs;
            std::vector<double> weights;
            for (std::size_t i = 0; i < k.pixel_count(); ++i) {
              for (auto j : k.neighbors(i)) nbrs.push_back(j);
              for (double w : k.weights(i)) weights.push_back(w);
              offsets.push_back(static_cast<std::uint32_t>(nbrs.size()));
            }
            return py::make_tuple(py::array_t<std::uint32_t>(offsets.size(), offsets.data()),
                                  py::array_t<std::uint32_t>(nbrs.size(), nbrs.data()),
                                  py::array_t<double>(weights.size(), weights.data()));
          },
          "Compressed rows (offsets, neighbors, weights) in raster order.");

  m.def(
      "build_kernel",
      [](const py::array& image, double omega, double zeta, const std::string& kernel_form) {
        const mal::Image img = to_image(image, "image");
        mal::CrfParams p;
        p.omega = omega;
        p.zeta = zeta;
        p.kernel_form = parse_form(kernel_form);
        py::gil_scoped_release release;
        return mal::build_kernel(img, p);
      },
      "image"_a, "omega"_a = 2.0, "zeta"_a = 0.5, "kernel_form"_a = "squared",
      "8-neighbour colour affinities of an (H, W[, C]) float32 image.");

  m.def(
      "mean_field",
      [](const py::array& mask, const mal::PairwiseKernel& kernel, int max_iters, double tol, const std::string& update,
         int threads) {
        const mal::ProbMask mm = to_mask(mask, "mask");
        require_same_shape(mm, kernel);
        const mal::CrfParams p = iteration_params(max_iters, tol, update, threads);
        mal::MeanFieldResult r;
        {
          py::gil_scoped_release release;
          r = mal::mean_field(mm, kernel, p);
        }
        return py::make_tuple(to_array(r.refined), r.iters_used);
      },
      "mask"_a, "kernel"_a, "max_iters"_a = 10, "tol"_a = 1e-4, "update"_a = "normalized", "threads"_a = 1,
      "Refines a soft mask. Returns (refined, iterations_used).");

  m.def(
      "mil_loss",
      [](const py::array& mask, const std::array<double, 4>& box, bool negative_bags) {
        const mal::ProbMask mm = to_mask(mask, "mask");
        mal::LossAndGrad r;
        {
          py::gil_scoped_release release;
          r = mal::mil_loss(mm, mal::build_bags(mm.width(), mm.height(), to_box(box), {negative_bags}));
        }
        return py::make_tuple(r.loss, to_array(r.grad));
      },
      "mask"_a, "box"_a, "negative_bags"_a = true,
      "Row and column bag loss for a box (x0, y0, x1, y1) in mask pixels. Returns (loss, grad).");

  m.def(
      "crf_self_training_loss",
      [](const py::array& mask, const py::array& pseudo_label) {
        const mal::ProbMask mm = to_mask(mask, "mask");
        const mal::ProbMask l = to_mask(pseudo_label, "pseudo_label");
        mal::LossAndGrad r;
        {
          py::gil_scoped_release release;
          r = mal::crf_self_training_loss(mm, l);
        }
        return py::make_tuple(r.loss, to_array(r.grad));
      },
      "mask"_a, "pseudo_label"_a, "Dice loss toward a fixed pseudo-label. Returns (loss, grad).");

  m.def(
      "total_loss",
      [](const py::array& mask, const py::array& teacher, const mal::PairwiseKernel& kernel,
         const std::array<double, 4>& box, double alpha_mil, double alpha_crf, int max_iters, double tol,
         const std::string& update, bool negative_bags, int threads) {
        const mal::ProbMask mm = to_mask(mask, "mask");
        const mal::ProbMask mt = to_mask(teacher, "teacher");
        require_same_shape(mm, kernel);
        const mal::CrfParams p = iteration_params(max_iters, tol, update, threads);
        mal::TotalLoss r;
        {
          py::gil_scoped_release release;
          const mal::BagSet bags = mal::build_bags(mm.width(), mm.height(), to_box(box), {negative_bags});
          r = mal::total_loss(mm, mt, kernel, bags, {alpha_mil, alpha_crf}, p);
        }
        py::dict out;
        out["loss"] = r.loss;
        out["mil"] = r.mil;
        out["crf"] = r.crf;
        out["grad"] = to_array(r.grad);
        out["refined"] = to_array(r.refined);
        out["crf_iters"] = r.crf_iters;
        return out;
      },
      "mask"_a, "teacher"_a, "kernel"_a, "box"_a, "alpha_mil"_a = 4.0, "alpha_crf"_a = 0.5, "max_iters"_a = 10,
      "tol"_a = 1e-4, "update"_a = "normalized", "negative_bags"_a = true, "threads"_a = 1,
      "Weighted MIL plus self-training loss with the pseudo-label held fixed.\n"
      "Returns a dict with loss, mil, crf, grad, refined and crf_iters.");
}

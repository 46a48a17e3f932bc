#include "flowfusion/flow.hpp"

#include <cmath>
#include <string>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/error.hpp"
#include "flowfusion/kernels.hpp"

namespace flowfusion {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string pair_name(std::size_t a, std::size_t b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

FileImportFlow FileImportFlow::open(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory))
    throw ProviderError("flow directory not found: " + directory.string());
  return FileImportFlow{directory};
}

std::filesystem::path FileImportFlow::file_for(std::size_t a, std::size_t b) const {
  return directory / ("flow_" + std::to_string(a) + "_" + std::to_string(b) + ".flo");
}

FlowField pyramidal_lucas_kanade(const ImageD& a, const ImageD& b, const PyramidalLkFlow& params, Execution exec) {
  if (!a.same_shape(b)) throw DimensionError("flow inputs differ in size");
  if (params.levels < 1) throw ParameterError("levels must be >= 1");
  if (params.window < 1 || params.window % 2 == 0) throw ParameterError("window must be a positive odd number");
  if (params.iterations < 1) throw ParameterError("iterations must be >= 1");

  std::vector<ImageD> pa{a}, pb{b};
  for (int l = 1; l < params.levels; ++l) {
    if (pa.back().width() < 2 * params.window || pa.back().height() < 2 * params.window) break;
    pa.push_back(downsample_average(pa.back()));
    pb.push_back(downsample_average(pb.back()));
  }

  const kernels::LkLevelParams lp{params.window / 2, params.iterations, params.min_eigenvalue};
  ImageD fu, fv;
  Mask valid;
  for (int l = static_cast<int>(pa.size()) - 1; l >= 0; --l) {
    const ImageD& la = pa[l];
    const ImageD& lb = pb[l];
    ImageD nu(la.width(), la.height()), nv(la.width(), la.height());
    if (!fu.empty()) {
      // coarse pixel centers sit at ((x - 0.5) / 2, (y - 0.5) / 2)
      for (int y = 0; y < la.height(); ++y) {
        for (int x = 0; x < la.width(); ++x) {
          const double cu = (x - 0.5) / 2.0, cv = (y - 0.5) / 2.0;
          nu(x, y) = 2.0 * sample_clamped(fu, cu, cv);
          nv(x, y) = 2.0 * sample_clamped(fv, cu, cv);
        }
      }
    }
    fu = std::move(nu);
    fv = std::move(nv);
    valid = Mask(la.width(), la.height(), 0);
    const ImageD gx = gradient_x(lb);
    const ImageD gy = gradient_y(lb);
    if (exec == Execution::parallel)
      kernels::lk_refine_level(la, lb, gx, gy, lp, fu, fv, valid);
    else
      kernels::serial::lk_refine_level(la, lb, gx, gy, lp, fu, fv, valid);
  }

  FlowField out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (valid(x, y)) out.set(x, y, fu(x, y), fv(x, y));
    }
  }
  return out;
}

FlowField compute_optical_flow(const FlowProvider& provider, const RgbdFrame& a, const RgbdFrame& b,
                               Execution exec) {
  if (!a.intensity.same_shape(b.intensity)) throw DimensionError("frames differ in size");
  const int w = a.width(), h = a.height();
  return std::visit(
      Overloaded{
          [&](const ExactSyntheticFlow& p) -> FlowField {
            if (b.index != a.index + 1 || !p.flows || a.index >= p.flows->size())
              throw ProviderError("no exact flow for pair " + pair_name(a.index, b.index));
            const FlowField& f = (*p.flows)[a.index];
            if (f.width() != w || f.height() != h) throw DimensionError("exact flow has wrong size");
            return f;
          },
          [&](const PyramidalLkFlow& p) { return pyramidal_lucas_kanade(a.intensity, b.intensity, p, exec); },
          [&](const FileImportFlow& p) -> FlowField {
            const auto path = p.file_for(a.index, b.index);
            if (!std::filesystem::exists(path))
              throw ProviderError("missing flow file " + path.string() + " for pair " + pair_name(a.index, b.index));
            return read_flow_file(path, std::make_pair(w, h));
          }},
      provider);
}

FlowField compute_ego_flow(const RgbdFrame& a, const Twist& xi, const PinholeIntrinsics& K, Execution exec) {
  const RigidTransform T = se3_exp(xi);
  return exec == Execution::parallel ? kernels::ego_flow(a, T, K) : kernels::serial::ego_flow(a, T, K);
}

FlowResidualField compute_flow_residual(const FlowField& optical, const FlowField& ego) {
  if (optical.width() != ego.width() || optical.height() != ego.height())
    throw DimensionError("flow fields differ in size");
  FlowResidualField r{ImageD(optical.width(), optical.height()), Mask(optical.width(), optical.height(), 0)};
  for (int y = 0; y < optical.height(); ++y) {
    for (int x = 0; x < optical.width(); ++x) {
      if (!optical.is_valid(x, y) || !ego.is_valid(x, y)) continue;
      r.magnitude(x, y) = std::hypot(optical.u(x, y) - ego.u(x, y), optical.v(x, y) - ego.v(x, y));
      r.valid(x, y) = 1;
    }
  }
  return r;
}

}  // namespace flowfusion

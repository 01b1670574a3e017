#include "vidfeat/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Dense>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"

namespace vidfeat {
namespace {

constexpr std::uint32_t kMinFlowDim = 16;

struct Plane {
  std::uint32_t w = 0, h = 0;
  std::vector<float> data;

  Plane() = default;
  Plane(std::uint32_t w_, std::uint32_t h_) : w(w_), h(h_), data(std::size_t(w_) * h_, 0.0f) {}
  float& at(std::uint32_t x, std::uint32_t y) { return data[std::size_t(y) * w + x]; }
  float at(std::uint32_t x, std::uint32_t y) const { return data[std::size_t(y) * w + x]; }
};

// Horizontal then vertical correlation with replicate borders.
void sep_correlate(const Plane& src, Plane& dst, const std::vector<float>& kx,
                   const std::vector<float>& ky, Plane& scratch) {
  int rx = static_cast<int>(kx.size() / 2);
  int ry = static_cast<int>(ky.size() / 2);
  int w = static_cast<int>(src.w), h = static_cast<int>(src.h);
  scratch = Plane(src.w, src.h);
  for (int y = 0; y < h; ++y) {
    const float* row = src.data.data() + std::size_t(y) * w;
    float* out = scratch.data.data() + std::size_t(y) * w;
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int k = -rx; k <= rx; ++k) {
        int xx = std::clamp(x + k, 0, w - 1);
        s += kx[k + rx] * row[xx];
      }
      out[x] = s;
    }
  }
  dst = Plane(src.w, src.h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int k = -ry; k <= ry; ++k) {
        int yy = std::clamp(y + k, 0, h - 1);
        s += ky[k + ry] * scratch.at(x, yy);
      }
      dst.at(x, y) = s;
    }
  }
}

std::vector<float> gaussian_kernel(int radius, float sigma) {
  std::vector<float> k(2 * radius + 1);
  for (int t = -radius; t <= radius; ++t)
    k[t + radius] = std::exp(-0.5f * t * t / (sigma * sigma));
  return k;
}

// Quadratic expansion f ~ c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y.
struct Expansion {
  std::uint32_t w = 0, h = 0;
  Plane bx, by, axx, ayy, axy;
};

Expansion polynomial_expansion(const Plane& img, int radius, float sigma) {
  std::vector<float> g0 = gaussian_kernel(radius, sigma);
  std::vector<float> g1(g0.size()), g2(g0.size());
  for (int t = -radius; t <= radius; ++t) {
    g1[t + radius] = t * g0[t + radius];
    g2[t + radius] = float(t) * t * g0[t + radius];
  }

  double m0 = 0, m2 = 0, m4 = 0;
  for (int t = -radius; t <= radius; ++t) {
    double g = g0[t + radius];
    m0 += g;
    m2 += g * t * t;
    m4 += g * t * t * t * t;
  }
  // Metric G over basis (1, x, y, x^2, y^2, xy) for separable applicability.
  Eigen::Matrix<double, 6, 6> G = Eigen::Matrix<double, 6, 6>::Zero();
  double S = m0 * m0, Sx2 = m2 * m0, Sx4 = m4 * m0, Sx2y2 = m2 * m2;
  G(0, 0) = S;
  G(0, 3) = G(3, 0) = Sx2;
  G(0, 4) = G(4, 0) = Sx2;
  G(1, 1) = Sx2;
  G(2, 2) = Sx2;
  G(3, 3) = Sx4;
  G(4, 4) = Sx4;
  G(3, 4) = G(4, 3) = Sx2y2;
  G(5, 5) = Sx2y2;
  Eigen::Matrix<double, 6, 6> Ginv = G.inverse();

  // Correlation of the image with each basis-weighted applicability kernel.
  Plane p[6], scratch;
  sep_correlate(img, p[0], g0, g0, scratch);
  sep_correlate(img, p[1], g1, g0, scratch);
  sep_correlate(img, p[2], g0, g1, scratch);
  sep_correlate(img, p[3], g2, g0, scratch);
  sep_correlate(img, p[4], g0, g2, scratch);
  sep_correlate(img, p[5], g1, g1, scratch);

  Expansion e;
  e.w = img.w;
  e.h = img.h;
  e.bx = Plane(img.w, img.h);
  e.by = Plane(img.w, img.h);
  e.axx = Plane(img.w, img.h);
  e.ayy = Plane(img.w, img.h);
  e.axy = Plane(img.w, img.h);
  std::size_t n = img.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double proj[6];
    for (int k = 0; k < 6; ++k) proj[k] = p[k].data[i];
    auto coeff = [&](int row) {
      double s = 0;
      for (int k = 0; k < 6; ++k) s += Ginv(row, k) * proj[k];
      return static_cast<float>(s);
    };
    e.bx.data[i] = coeff(1);
    e.by.data[i] = coeff(2);
    e.axx.data[i] = coeff(3);
    e.ayy.data[i] = coeff(4);
    e.axy.data[i] = coeff(5);
  }
  return e;
}

void copy_border_from_interior(Plane& u, Plane& v, int radius) {
  int w = static_cast<int>(u.w), h = static_cast<int>(u.h);
  int lo_x = std::min(radius, (w - 1) / 2), hi_x = std::max(w - 1 - radius, lo_x);
  int lo_y = std::min(radius, (h - 1) / 2), hi_y = std::max(h - 1 - radius, lo_y);
  for (int y = 0; y < h; ++y) {
    int sy = std::clamp(y, lo_y, hi_y);
    for (int x = 0; x < w; ++x) {
      int sx = std::clamp(x, lo_x, hi_x);
      if (sx != x || sy != y) {
        u.at(x, y) = u.at(sx, sy);
        v.at(x, y) = v.at(sx, sy);
      }
    }
  }
}

// One Farneback displacement refinement given both expansions and the
// current estimate; solves the windowed 2x2 normal equations per pixel.
void update_flow(const Expansion& e1, const Expansion& e2, Plane& u, Plane& v,
                 int radius) {
  int w = static_cast<int>(e1.w), h = static_cast<int>(e1.h);
  Plane g11(e1.w, e1.h), g12(e1.w, e1.h), g22(e1.w, e1.h);
  Plane h1(e1.w, e1.h), h2(e1.w, e1.h);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float du = u.at(x, y), dv = v.at(x, y);
      int x2 = std::clamp(static_cast<int>(std::lround(x + du)), 0, w - 1);
      int y2 = std::clamp(static_cast<int>(std::lround(y + dv)), 0, h - 1);
      // Fold in the offset actually used for the fetch, not the raw estimate.
      float rdu = static_cast<float>(x2 - x), rdv = static_cast<float>(y2 - y);

      float a11 = 0.5f * (e1.axx.at(x, y) + e2.axx.at(x2, y2));
      float a22 = 0.5f * (e1.ayy.at(x, y) + e2.ayy.at(x2, y2));
      float a12 = 0.25f * (e1.axy.at(x, y) + e2.axy.at(x2, y2));
      float db1 = -0.5f * (e2.bx.at(x2, y2) - e1.bx.at(x, y)) + a11 * rdu + a12 * rdv;
      float db2 = -0.5f * (e2.by.at(x2, y2) - e1.by.at(x, y)) + a12 * rdu + a22 * rdv;

      g11.at(x, y) = a11 * a11 + a12 * a12;
      g12.at(x, y) = a12 * (a11 + a22);
      g22.at(x, y) = a12 * a12 + a22 * a22;
      h1.at(x, y) = a11 * db1 + a12 * db2;
      h2.at(x, y) = a12 * db1 + a22 * db2;
    }
  }

  std::vector<float> win = gaussian_kernel(radius, 0.5f * radius);
  float wsum = 0.0f;
  for (float k : win) wsum += k;
  for (float& k : win) k /= wsum;
  Plane scratch, tmp;
  for (Plane* pl : {&g11, &g12, &g22, &h1, &h2}) {
    sep_correlate(*pl, tmp, win, win, scratch);
    *pl = tmp;
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float det = g11.at(x, y) * g22.at(x, y) - g12.at(x, y) * g12.at(x, y);
      if (std::abs(det) > 1e-12f) {
        float nu = (g22.at(x, y) * h1.at(x, y) - g12.at(x, y) * h2.at(x, y)) / det;
        float nv = (g11.at(x, y) * h2.at(x, y) - g12.at(x, y) * h1.at(x, y)) / det;
        u.at(x, y) = nu;
        v.at(x, y) = nv;
      }
    }
  }
  copy_border_from_interior(u, v, radius);
}

Plane downsample_half(const Plane& src, std::uint32_t nw, std::uint32_t nh) {
  static const std::vector<float> binomial5 = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16,
                                               1.0f / 16};
  Plane blurred(src.w, src.h), scratch(src.w, src.h);
  sep_correlate(src, blurred, binomial5, binomial5, scratch);
  Plane dst(nw, nh);
  float sx = static_cast<float>(src.w) / nw;
  float sy = static_cast<float>(src.h) / nh;
  ImageView view{blurred.data.data(), src.w, src.h};
  for (std::uint32_t y = 0; y < nh; ++y)
    for (std::uint32_t x = 0; x < nw; ++x)
      dst.at(x, y) = view.sample((x + 0.5f) * sx - 0.5f, (y + 0.5f) * sy - 0.5f);
  return dst;
}

std::vector<Plane> build_plane_pyramid(ImageView img, int levels) {
  std::vector<Plane> pyr;
  Plane base(img.width, img.height);
  std::memcpy(base.data.data(), img.data, base.data.size() * sizeof(float));
  pyr.push_back(std::move(base));
  for (int l = 1; l < levels; ++l) {
    std::uint32_t nw = (pyr.back().w + 1) / 2;
    std::uint32_t nh = (pyr.back().h + 1) / 2;
    if (nw < kMinFlowDim || nh < kMinFlowDim) break;
    pyr.push_back(downsample_half(pyr.back(), nw, nh));
  }
  return pyr;
}

FlowField flow_between(const std::vector<Plane>& pyr1, const std::vector<Plane>& pyr2,
                       const FlowParams& params) {
  int levels = static_cast<int>(pyr1.size());
  Plane u, v;
  for (int lev = levels - 1; lev >= 0; --lev) {
    const Plane& im1 = pyr1[lev];
    const Plane& im2 = pyr2[lev];
    if (lev == levels - 1) {
      u = Plane(im1.w, im1.h);
      v = Plane(im1.w, im1.h);
    } else {
      Plane nu(im1.w, im1.h), nv(im1.w, im1.h);
      float rx = static_cast<float>(im1.w) / u.w;
      float ry = static_cast<float>(im1.h) / u.h;
      ImageView uv{u.data.data(), u.w, u.h}, vv{v.data.data(), v.w, v.h};
      for (std::uint32_t y = 0; y < im1.h; ++y) {
        for (std::uint32_t x = 0; x < im1.w; ++x) {
          float sxp = (x + 0.5f) / rx - 0.5f;
          float syp = (y + 0.5f) / ry - 0.5f;
          nu.at(x, y) = uv.sample(sxp, syp) * rx;
          nv.at(x, y) = vv.sample(sxp, syp) * ry;
        }
      }
      u = std::move(nu);
      v = std::move(nv);
    }
    Expansion e1 = polynomial_expansion(im1, params.window_radius, params.sigma);
    Expansion e2 = polynomial_expansion(im2, params.window_radius, params.sigma);
    for (int it = 0; it < params.iterations; ++it)
      update_flow(e1, e2, u, v, params.window_radius);
  }

  FlowField f;
  f.width = u.w;
  f.height = u.h;
  f.u = std::move(u.data);
  f.v = std::move(v.data);
  return f;
}

void validate_flow_input(ImageView a, ImageView b, const FlowParams& params) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("compute_flow: frame dimensions differ");
  if (a.width < kMinFlowDim || a.height < kMinFlowDim)
    throw std::invalid_argument("compute_flow: frames must be at least 16x16");
  if (params.pyramid_levels < 1 || params.iterations < 1 || params.window_radius < 1)
    throw std::invalid_argument("compute_flow: params must be positive");
}

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

FlowField compute_flow(ImageView a, ImageView b, const FlowParams& params) {
  validate_flow_input(a, b, params);
  return flow_between(build_plane_pyramid(a, params.pyramid_levels),
                      build_plane_pyramid(b, params.pyramid_levels), params);
}

FlowSequence compute_flow_sequence(const GrayVideo& video, const FlowParams& params) {
  if (video.frames < 2)
    throw std::invalid_argument("compute_flow_sequence: need at least 2 frames");
  validate_flow_input(frame_view(video, 0), frame_view(video, 0), params);
  FlowSequence seq;
  seq.reserve(video.frames - 1);
  std::vector<Plane> prev = build_plane_pyramid(frame_view(video, 0), params.pyramid_levels);
  for (std::uint32_t t = 1; t < video.frames; ++t) {
    std::vector<Plane> cur = build_plane_pyramid(frame_view(video, t), params.pyramid_levels);
    seq.push_back(flow_between(prev, cur, params));
    prev = std::move(cur);
  }
  return seq;
}

void save_flo(const FlowField& flow, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os.write("FLO1", 4);
  put_u32le(os, flow.width);
  put_u32le(os, flow.height);
  std::size_t n = std::size_t(flow.width) * flow.height;
  std::vector<float> inter(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    inter[2 * i] = flow.u[i];
    inter[2 * i + 1] = flow.v[i];
  }
  os.write(reinterpret_cast<const char*>(inter.data()),
           static_cast<std::streamsize>(inter.size() * sizeof(float)));
  if (!os) throw IoError(IoError::Kind::truncated_payload, "short write: " + path.string());
}

FlowField load_flo(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open: " + path.string());
  char header[12];
  is.read(header, 12);
  if (is.gcount() != 12)
    throw IoError(IoError::Kind::corrupt_header, "FLO1 header truncated: " + path.string());
  if (std::memcmp(header, "FLO1", 4) != 0)
    throw IoError(IoError::Kind::corrupt_header, "bad magic, not a FLO1 file: " + path.string());
  auto get_u32 = [&](int off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(static_cast<unsigned char>(header[off + i])) << (8 * i);
    return v;
  };
  FlowField f;
  f.width = get_u32(4);
  f.height = get_u32(8);
  if (f.width == 0 || f.height == 0)
    throw IoError(IoError::Kind::corrupt_header, "zero dimension in FLO1 header");
  std::size_t n = std::size_t(f.width) * f.height;
  if (n > (1ull << 30))
    throw IoError(IoError::Kind::corrupt_header, "FLO1 header declares unreasonable size");
  std::vector<float> inter(2 * n);
  is.read(reinterpret_cast<char*>(inter.data()),
          static_cast<std::streamsize>(inter.size() * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != inter.size() * sizeof(float))
    throw IoError(IoError::Kind::truncated_payload, "FLO1 payload truncated: " + path.string());
  f.u.resize(n);
  f.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.u[i] = inter[2 * i];
    f.v[i] = inter[2 * i + 1];
  }
  return f;
}

namespace {

Eigen::Matrix3d fit_homography_dlt(const std::vector<PointMatch>& matches,
                                   const std::vector<int>& idx) {
  double cx1 = 0, cy1 = 0, cx2 = 0, cy2 = 0;
  for (int i : idx) {
    cx1 += matches[i].x1;
    cy1 += matches[i].y1;
    cx2 += matches[i].x2;
    cy2 += matches[i].y2;
  }
  double n = static_cast<double>(idx.size());
  cx1 /= n;
  cy1 /= n;
  cx2 /= n;
  cy2 /= n;
  double s1 = 0, s2 = 0;
  for (int i : idx) {
    s1 += std::hypot(matches[i].x1 - cx1, matches[i].y1 - cy1);
    s2 += std::hypot(matches[i].x2 - cx2, matches[i].y2 - cy2);
  }
  s1 = s1 > 1e-12 ? std::sqrt(2.0) * n / s1 : 1.0;
  s2 = s2 > 1e-12 ? std::sqrt(2.0) * n / s2 : 1.0;

  Eigen::MatrixXd A(2 * idx.size(), 9);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const PointMatch& m = matches[idx[r]];
    double x = (m.x1 - cx1) * s1, y = (m.y1 - cy1) * s1;
    double xp = (m.x2 - cx2) * s2, yp = (m.y2 - cy2) * s2;
    A.row(2 * r) << 0, 0, 0, -x, -y, -1, yp * x, yp * y, yp;
    A.row(2 * r + 1) << x, y, 1, 0, 0, 0, -xp * x, -xp * y, -xp;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  Eigen::VectorXd hvec = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);

  Eigen::Matrix3d T1, T2;
  T1 << s1, 0, -s1 * cx1, 0, s1, -s1 * cy1, 0, 0, 1;
  T2 << s2, 0, -s2 * cx2, 0, s2, -s2 * cy2, 0, 0, 1;
  Eigen::Matrix3d H = T2.inverse() * Hn * T1;
  if (std::abs(H(2, 2)) > 1e-12) H /= H(2, 2);
  return H;
}

bool homography_ok(const Eigen::Matrix3d& H) {
  return H.allFinite() && std::abs(H.determinant()) > 1e-12;
}

std::pair<double, double> apply_homography(const Eigen::Matrix3d& H, double x, double y) {
  double w = H(2, 0) * x + H(2, 1) * y + H(2, 2);
  if (std::abs(w) < 1e-12) return {1e18, 1e18};
  return {(H(0, 0) * x + H(0, 1) * y + H(0, 2)) / w,
          (H(1, 0) * x + H(1, 1) * y + H(1, 2)) / w};
}

}  // namespace

RectifyResult rectify_flow(const FlowField& flow, const std::vector<PointMatch>& matches,
                           std::uint64_t seed) {
  if (matches.size() < 4)
    throw std::invalid_argument("rectify_flow: need at least 4 correspondences");

  constexpr int kIterations = 200;
  constexpr double kInlierThreshold = 1.0;

  auto rng = make_rng(seed, "rectify_ransac");
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);

  auto count_inliers = [&](const Eigen::Matrix3d& H, std::vector<int>* out) {
    int count = 0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      auto [px, py] = apply_homography(H, matches[i].x1, matches[i].y1);
      double err = std::hypot(px - matches[i].x2, py - matches[i].y2);
      if (err <= kInlierThreshold) {
        ++count;
        if (out) out->push_back(static_cast<int>(i));
      }
    }
    return count;
  };

  Eigen::Matrix3d best_H = Eigen::Matrix3d::Identity();
  int best_inliers = -1;
  for (int it = 0; it < kIterations; ++it) {
    std::vector<int> idx;
    while (idx.size() < 4) {
      int c = static_cast<int>(pick(rng));
      if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
    }
    Eigen::Matrix3d H = fit_homography_dlt(matches, idx);
    if (!homography_ok(H)) continue;
    int inliers = count_inliers(H, nullptr);
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_H = H;
    }
  }

  RectifyResult result;
  result.flow = flow;
  if (best_inliers < 4 || best_inliers < static_cast<int>(matches.size() + 1) / 2) {
    result.applied = false;
    return result;
  }

  std::vector<int> inlier_idx;
  count_inliers(best_H, &inlier_idx);
  Eigen::Matrix3d H = fit_homography_dlt(matches, inlier_idx);
  if (!homography_ok(H)) H = best_H;

  for (std::uint32_t y = 0; y < flow.height; ++y) {
    for (std::uint32_t x = 0; x < flow.width; ++x) {
      auto [px, py] = apply_homography(H, x, y);
      std::size_t i = std::size_t(y) * flow.width + x;
      result.flow.u[i] = flow.u[i] - static_cast<float>(px - x);
      result.flow.v[i] = flow.v[i] - static_cast<float>(py - y);
    }
  }
  result.applied = true;
  return result;
}

std::vector<PointMatch> matches_from_flow(const FlowField& flow, int step) {
  if (step < 1) throw std::invalid_argument("matches_from_flow: step must be >= 1");
  std::vector<PointMatch> out;
  for (std::uint32_t y = step / 2; y < flow.height; y += step) {
    for (std::uint32_t x = step / 2; x < flow.width; x += step) {
      float u = flow.u_at(x, y), v = flow.v_at(x, y);
      out.push_back(PointMatch{static_cast<float>(x), static_cast<float>(y),
                               x + u, y + v});
    }
  }
  return out;
}

}  // namespace vidfeat

#include "flowfusion/image.hpp"

#include <algorithm>

namespace flowfusion {

ImageD downsample_average(const ImageD& img) {
  ImageD out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 0.25 * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) +
                          img(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

ImageD downsample_depth_median(const ImageD& depth) {
  ImageD out(depth.width() / 2, depth.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      double v[4];
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const double d = depth(2 * x + dx, 2 * y + dy);
          if (d > 0.0) v[n++] = d;
        }
      }
      if (n == 0) continue;
      std::sort(v, v + n);
      out(x, y) = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
  }
  return out;
}

ImageD gradient_x(const ImageD& img) {
  ImageD g(img.width(), img.height());
  const int w = img.width();
  if (w < 2) return g;
  for (int y = 0; y < img.height(); ++y) {
    g(0, y) = img(1, y) - img(0, y);
    g(w - 1, y) = img(w - 1, y) - img(w - 2, y);
    for (int x = 1; x < w - 1; ++x) g(x, y) = 0.5 * (img(x + 1, y) - img(x - 1, y));
  }
  return g;
}

ImageD gradient_y(const ImageD& img) {
  ImageD g(img.width(), img.height());
  const int h = img.height();
  if (h < 2) return g;
  for (int x = 0; x < img.width(); ++x) {
    g(x, 0) = img(x, 1) - img(x, 0);
    g(x, h - 1) = img(x, h - 1) - img(x, h - 2);
  }
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 0; x < img.width(); ++x) g(x, y) = 0.5 * (img(x, y + 1) - img(x, y - 1));
  }
  return g;
}

}  // namespace flowfusion

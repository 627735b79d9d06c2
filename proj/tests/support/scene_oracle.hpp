#pragma once

// Independent re-derivation of what a synthetic sample should contain: a
// per-pixel point-in-shape rasterizer and a text-level predicate evaluator
// that reads the expression words, not the generator's Expression struct.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "shnet/synth_data.hpp"

namespace oracle {

inline std::string shape_word(shnet::synth::ShapeKind s) {
  switch (s) {
    case shnet::synth::ShapeKind::kCircle: return "circle";
    case shnet::synth::ShapeKind::kSquare: return "square";
    case shnet::synth::ShapeKind::kTriangle: return "triangle";
  }
  return "?";
}

inline std::string color_word(shnet::synth::Color c) {
  switch (c) {
    case shnet::synth::Color::kRed: return "red";
    case shnet::synth::Color::kGreen: return "green";
    case shnet::synth::Color::kBlue: return "blue";
    case shnet::synth::Color::kYellow: return "yellow";
  }
  return "?";
}

inline std::string size_word(shnet::synth::SizeClass s) {
  return s == shnet::synth::SizeClass::kSmall ? "small" : "big";
}

/// Pixel (x, y) is covered when its center (x + 0.5, y + 0.5) lies inside.
inline bool covers(const shnet::synth::SceneObject& o, std::size_t x, std::size_t y) {
  const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
  const double cx = o.cx, cy = o.cy, r = o.radius;
  switch (o.shape) {
    case shnet::synth::ShapeKind::kCircle:
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
    case shnet::synth::ShapeKind::kSquare:
      return std::abs(px - cx) <= r && std::abs(py - cy) <= r;
    case shnet::synth::ShapeKind::kTriangle: {
      // Same-side test against the three edges of apex (cx, cy - r),
      // base (cx - r, cy + r), (cx + r, cy + r).
      const double ax = cx, ay = cy - r, bx = cx - r, by = cy + r, qx = cx + r, qy = cy + r;
      auto edge = [&](double x0, double y0, double x1, double y1) {
        return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0);
      };
      const double e1 = edge(ax, ay, qx, qy), e2 = edge(qx, qy, bx, by), e3 = edge(bx, by, ax, ay);
      return (e1 >= 0 && e2 >= 0 && e3 >= 0) || (e1 <= 0 && e2 <= 0 && e3 <= 0);
    }
  }
  return false;
}

inline std::size_t covered_pixels(const shnet::synth::SceneObject& o, std::size_t resolution) {
  std::size_t n = 0;
  for (std::size_t y = 0; y < resolution; ++y)
    for (std::size_t x = 0; x < resolution; ++x) n += covers(o, x, y) ? 1 : 0;
  return n;
}

/// Objects the expression text describes, or nullopt if the text matches no
/// template.
inline std::optional<std::vector<std::size_t>> referents(
    const shnet::synth::Scene& scene, const std::vector<std::string>& w) {
  const auto& objs = scene.objects;
  auto matches = [&](std::size_t i, const std::string& color, const std::string& shape) {
    return (color.empty() || color_word(objs[i].color) == color) && shape_word(objs[i].shape) == shape;
  };
  std::vector<std::size_t> out;
  if (w.size() == 3 && w[0] == "the") {
    for (std::size_t i = 0; i < objs.size(); ++i)
      if (matches(i, w[1], w[2])) out.push_back(i);
    return out;
  }
  if (w.size() == 4 && w[0] == "the") {
    for (std::size_t i = 0; i < objs.size(); ++i)
      if (size_word(objs[i].size) == w[1] && matches(i, w[2], w[3])) out.push_back(i);
    return out;
  }
  if (w.size() == 6 && w[2] == "left" && w[3] == "of") {
    for (std::size_t i = 0; i < objs.size(); ++i) {
      if (!matches(i, "", w[1])) continue;
      for (std::size_t j = 0; j < objs.size(); ++j)
        if (j != i && matches(j, "", w[5]) && objs[j].cx > objs[i].cx) {
          out.push_back(i);
          break;
        }
    }
    return out;
  }
  if (w.size() == 6 && w[3] == "from" && w[5] == "left") {
    const std::vector<std::string> ordinals{"first", "second", "third", "fourth", "fifth"};
    const auto it = std::find(ordinals.begin(), ordinals.end(), w[1]);
    if (it == ordinals.end()) return std::nullopt;
    std::vector<std::size_t> same;
    for (std::size_t i = 0; i < objs.size(); ++i)
      if (matches(i, "", w[2])) same.push_back(i);
    std::stable_sort(same.begin(), same.end(),
                     [&](std::size_t a, std::size_t b) { return objs[a].cx < objs[b].cx; });
    const auto k = static_cast<std::size_t>(it - ordinals.begin());
    if (k < same.size()) out.push_back(same[k]);
    return out;
  }
  if (w.size() == 7 && w[3] == "above") {
    for (std::size_t i = 0; i < objs.size(); ++i) {
      if (!matches(i, w[1], w[2])) continue;
      for (std::size_t j = 0; j < objs.size(); ++j)
        if (j != i && matches(j, w[5], w[6]) && objs[j].cy > objs[i].cy) {
          out.push_back(i);
          break;
        }
    }
    return out;
  }
  return std::nullopt;
}

}  // namespace oracle

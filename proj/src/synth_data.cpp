#include "shnet/synth_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

namespace shnet::synth {

namespace {

constexpr std::array<std::string_view, 3> kShapeNames{"circle", "square",
                                                      "triangle"};
constexpr std::array<std::string_view, 4> kColorNames{"red", "green", "blue",
                                                      "yellow"};
constexpr std::array<std::string_view, 5> kOrdinals{"first", "second", "third",
                                                    "fourth", "fifth"};
constexpr std::array<std::array<std::uint8_t, 3>, 4> kPalette{{
    {230, 25, 25},
    {25, 200, 50},
    {40, 60, 240},
    {240, 225, 25},
}};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
T pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<T>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

SceneObject sample_object(std::mt19937_64& rng, std::size_t resolution) {
  SceneObject o;
  o.shape = pick<ShapeKind>(rng, kShapeKinds);
  o.color = pick<Color>(rng, kColors);
  o.size = pick<SizeClass>(rng, 2);
  const double unit = static_cast<double>(resolution) / 64.0;
  if (o.size == SizeClass::kSmall) {
    o.radius = uniform_int(rng, static_cast<int>(std::lround(5 * unit)),
                           static_cast<int>(std::lround(7 * unit)));
  } else {
    o.radius = uniform_int(rng, static_cast<int>(std::lround(10 * unit)),
                           static_cast<int>(std::lround(13 * unit)));
  }
  const int r = o.radius;
  const int extent = static_cast<int>(resolution);
  o.cx = uniform_int(rng, r, extent - r);
  o.cy = uniform_int(rng, r, extent - r);
  return o;
}

bool layout_ok(const Scene& scene,
               const std::vector<std::vector<std::size_t>>& pixels) {
  const auto& objs = scene.objects;
  for (std::size_t a = 0; a < objs.size(); ++a) {
    for (std::size_t b = a + 1; b < objs.size(); ++b) {
      // Spatial words need unambiguous orderings.
      if (std::abs(objs[a].cx - objs[b].cx) < 2) return false;
      if (std::abs(objs[a].cy - objs[b].cy) < 2) return false;
      std::vector<std::size_t> common;
      std::set_intersection(pixels[a].begin(), pixels[a].end(),
                            pixels[b].begin(), pixels[b].end(),
                            std::back_inserter(common));
      const double overlap = static_cast<double>(common.size());
      if (overlap > 0.1 * static_cast<double>(pixels[a].size()) ||
          overlap > 0.1 * static_cast<double>(pixels[b].size())) {
        return false;
      }
    }
  }
  return true;
}

std::vector<Expression> candidates(const Scene& scene, Template kind) {
  std::vector<Expression> out;
  const auto& objs = scene.objects;
  auto base = [kind] {
    Expression e;
    e.kind = kind;
    return e;
  };
  switch (kind) {
    case Template::kColorShape:
    case Template::kSizeColorShape:
      for (const auto& o : objs) {
        Expression e = base();
        e.color = o.color;
        e.shape = o.shape;
        e.size = o.size;
        out.push_back(e);
      }
      break;
    case Template::kShapeLeftOfShape:
      for (const auto& o : objs)
        for (const auto& b : objs) {
          if (&o == &b || o.cx >= b.cx) continue;
          Expression e = base();
          e.shape = o.shape;
          e.other_shape = b.shape;
          out.push_back(e);
        }
      break;
    case Template::kOrdinalFromLeft:
      for (std::size_t s = 0; s < kShapeKinds; ++s) {
        const auto shape = static_cast<ShapeKind>(s);
        const auto count = static_cast<std::size_t>(std::count_if(
            objs.begin(), objs.end(),
            [shape](const SceneObject& o) { return o.shape == shape; }));
        for (std::size_t k = 1; k <= std::min(count, kOrdinals.size()); ++k) {
          Expression e = base();
          e.shape = shape;
          e.ordinal = k;
          out.push_back(e);
        }
      }
      break;
    case Template::kColorShapeAbove:
      for (const auto& o : objs)
        for (const auto& b : objs) {
          if (&o == &b || o.cy >= b.cy) continue;
          Expression e = base();
          e.color = o.color;
          e.shape = o.shape;
          e.other_color = b.color;
          e.other_shape = b.shape;
          out.push_back(e);
        }
      break;
  }
  // Deduplicate by surface form, keeping first occurrence order.
  std::vector<Expression> unique;
  std::set<std::string> seen;
  for (const auto& e : out)
    if (seen.insert(e.text()).second) unique.push_back(e);
  return unique;
}

// Rejects expressions where a single word already picks out the referent,
// so the remaining words carry no information.
bool informative(const Scene& scene, const Expression& e, std::size_t ref) {
  const auto& objs = scene.objects;
  const auto& r = objs[ref];
  auto any_other = [&](auto pred) {
    for (std::size_t i = 0; i < objs.size(); ++i)
      if (i != ref && pred(objs[i])) return true;
    return false;
  };
  switch (e.kind) {
    case Template::kColorShape:
    case Template::kColorShapeAbove:
      return any_other([&](const SceneObject& o) {
        return o.color == r.color || o.shape == r.shape;
      });
    case Template::kShapeLeftOfShape:
    case Template::kOrdinalFromLeft:
      return any_other([&](const SceneObject& o) { return o.shape == r.shape; });
    case Template::kSizeColorShape:
      return any_other([&](const SceneObject& o) {
        return o.color == r.color && o.shape == r.shape;
      });
  }
  return false;
}

Image8 render(const Scene& scene, std::mt19937_64& rng,
              const std::vector<std::vector<std::size_t>>& pixels) {
  const std::size_t r = scene.resolution;
  Image8 img;
  img.width = img.height = r;
  img.channels = 3;
  img.pixels.resize(r * r * 3);
  std::normal_distribution<double> noise(0.5, 0.05);
  for (auto& p : img.pixels) {
    const double v = std::clamp(noise(rng), 0.0, 1.0);
    p = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto& rgb = kPalette[static_cast<std::size_t>(scene.objects[k].color)];
    for (std::size_t idx : pixels[k])
      for (std::size_t ch = 0; ch < 3; ++ch) img.pixels[idx * 3 + ch] = rgb[ch];
  }
  return img;
}

}  // namespace

std::string_view name(ShapeKind s) { return kShapeNames[static_cast<std::size_t>(s)]; }
std::string_view name(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::string_view name(SizeClass s) {
  return s == SizeClass::kSmall ? "small" : "big";
}
std::string_view ordinal_word(std::size_t k) {
  if (k == 0 || k > kOrdinals.size()) {
    throw UsageError("ordinal out of range: " + std::to_string(k));
  }
  return kOrdinals[k - 1];
}

std::vector<std::string> Expression::tokens() const {
  auto w = [](std::string_view s) { return std::string(s); };
  switch (kind) {
    case Template::kColorShape:
      return {"the", w(name(color)), w(name(shape))};
    case Template::kShapeLeftOfShape:
      return {"the", w(name(shape)), "left", "of", "the", w(name(other_shape))};
    case Template::kOrdinalFromLeft:
      return {"the", w(ordinal_word(ordinal)), w(name(shape)), "from", "the",
              "left"};
    case Template::kSizeColorShape:
      return {"the", w(name(size)), w(name(color)), w(name(shape))};
    case Template::kColorShapeAbove:
      return {"the", w(name(color)), w(name(shape)), "above", "the",
              w(name(other_color)), w(name(other_shape))};
  }
  return {};
}

std::string Expression::text() const {
  std::string out;
  for (const auto& t : tokens()) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::vector<std::size_t> satisfiers(const Scene& scene, const Expression& e) {
  const auto& objs = scene.objects;
  std::vector<std::size_t> out;
  switch (e.kind) {
    case Template::kColorShape:
      for (std::size_t i = 0; i < objs.size(); ++i)
        if (objs[i].color == e.color && objs[i].shape == e.shape) out.push_back(i);
      break;
    case Template::kSizeColorShape:
      for (std::size_t i = 0; i < objs.size(); ++i)
        if (objs[i].color == e.color && objs[i].shape == e.shape &&
            objs[i].size == e.size)
          out.push_back(i);
      break;
    case Template::kShapeLeftOfShape:
      for (std::size_t i = 0; i < objs.size(); ++i) {
        if (objs[i].shape != e.shape) continue;
        for (std::size_t j = 0; j < objs.size(); ++j) {
          if (j != i && objs[j].shape == e.other_shape && objs[i].cx < objs[j].cx) {
            out.push_back(i);
            break;
          }
        }
      }
      break;
    case Template::kColorShapeAbove:
      for (std::size_t i = 0; i < objs.size(); ++i) {
        if (objs[i].shape != e.shape || objs[i].color != e.color) continue;
        for (std::size_t j = 0; j < objs.size(); ++j) {
          if (j != i && objs[j].shape == e.other_shape &&
              objs[j].color == e.other_color && objs[i].cy < objs[j].cy) {
            out.push_back(i);
            break;
          }
        }
      }
      break;
    case Template::kOrdinalFromLeft: {
      std::vector<std::size_t> same;
      for (std::size_t i = 0; i < objs.size(); ++i)
        if (objs[i].shape == e.shape) same.push_back(i);
      std::sort(same.begin(), same.end(), [&](std::size_t a, std::size_t b) {
        return objs[a].cx < objs[b].cx;
      });
      if (e.ordinal >= 1 && e.ordinal <= same.size()) out.push_back(same[e.ordinal - 1]);
      break;
    }
  }
  return out;
}

std::vector<std::size_t> rasterize(const SceneObject& o, std::size_t resolution) {
  std::vector<std::size_t> out;
  const int extent = static_cast<int>(resolution);
  const int r = o.radius;
  auto emit_row = [&](int y, double center, double half) {
    if (y < 0 || y >= extent) return;
    int lo = static_cast<int>(std::ceil(center - half - 0.5));
    int hi = static_cast<int>(std::floor(center + half - 0.5));
    lo = std::max(lo, 0);
    hi = std::min(hi, extent - 1);
    for (int x = lo; x <= hi; ++x)
      out.push_back(static_cast<std::size_t>(y) * resolution +
                    static_cast<std::size_t>(x));
  };
  for (int y = o.cy - r - 1; y <= o.cy + r; ++y) {
    const double dy = y + 0.5 - o.cy;
    switch (o.shape) {
      case ShapeKind::kCircle: {
        const double rem = static_cast<double>(r) * r - dy * dy;
        if (rem >= 0.0) emit_row(y, o.cx, std::sqrt(rem));
        break;
      }
      case ShapeKind::kSquare:
        if (std::abs(dy) <= r) emit_row(y, o.cx, r);
        break;
      case ShapeKind::kTriangle:
        // Half-width grows linearly from 0 at the apex to r at the base.
        if (dy >= -r && dy <= r) emit_row(y, o.cx, (dy + r) / 2.0);
        break;
    }
  }
  return out;
}

const std::vector<std::string>& grammar_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w{"the"};
    for (auto c : kColorNames) w.emplace_back(c);
    for (auto s : kShapeNames) w.emplace_back(s);
    for (auto o : kOrdinals) w.emplace_back(o);
    for (const char* extra : {"left", "of", "from", "small", "big", "above"})
      w.emplace_back(extra);
    return w;
  }();
  return words;
}

Vocabulary grammar_vocabulary() { return Vocabulary(grammar_words()); }

bool is_holdout(const Expression& e) {
  using enum ShapeKind;
  using enum Color;
  switch (e.kind) {
    case Template::kColorShape:
    case Template::kSizeColorShape:
    case Template::kColorShapeAbove:
      return (e.color == kYellow && e.shape == kTriangle) ||
             (e.color == kBlue && e.shape == kSquare) ||
             (e.color == kGreen && e.shape == kCircle);
    case Template::kShapeLeftOfShape:
      return (e.shape == kTriangle && e.other_shape == kCircle) ||
             (e.shape == kSquare && e.other_shape == kTriangle);
    case Template::kOrdinalFromLeft:
      return e.ordinal == 2 && e.shape == kTriangle;
  }
  return false;
}

RefSample generate(std::uint64_t seed, const GenerateOptions& options) {
  if (options.objects < 2 || options.objects > 5) {
    throw GenerationError("object count must be in [2, 5], got " +
                          std::to_string(options.objects));
  }
  std::mt19937_64 rng(seed);
  const auto kind = pick<Template>(rng, kTemplates);
  for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
    Scene scene;
    scene.resolution = options.resolution;
    std::vector<std::vector<std::size_t>> pixels;
    for (std::size_t k = 0; k < options.objects; ++k) {
      scene.objects.push_back(sample_object(rng, options.resolution));
      auto px = rasterize(scene.objects.back(), options.resolution);
      std::sort(px.begin(), px.end());
      pixels.push_back(std::move(px));
    }
    if (!layout_ok(scene, pixels)) continue;

    std::vector<std::pair<Expression, std::size_t>> valid;
    for (const auto& e : candidates(scene, kind)) {
      auto sat = satisfiers(scene, e);
      if (sat.size() != 1 || !informative(scene, e, sat.front())) continue;
      if (options.accept && !options.accept(e)) continue;
      valid.emplace_back(e, sat.front());
    }
    if (valid.empty()) continue;
    const auto& [expr, referent] = valid[pick<std::size_t>(rng, valid.size())];

    RefSample sample;
    sample.seed = seed;
    sample.expression = expr;
    sample.tokens = expr.tokens();
    sample.referent = referent;
    sample.image = render(scene, rng, pixels);
    sample.mask.width = sample.mask.height = options.resolution;
    sample.mask.channels = 1;
    sample.mask.pixels.assign(options.resolution * options.resolution, 0);
    for (std::size_t idx : pixels[referent]) sample.mask.pixels[idx] = 255;
    sample.scene = std::move(scene);
    return sample;
  }
  throw GenerationError("no valid scene for template " +
                        std::to_string(static_cast<int>(kind)) + " after " +
                        std::to_string(kMaxRejections) + " attempts (seed " +
                        std::to_string(seed) + ")");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ (stream * 0xd1b54a32d192ed03ULL)) +
                    index);
}

namespace {

// Retries on a fresh sub-seed when a filter makes the drawn template
// infeasible for the drawn object count.
RefSample generate_filtered(std::uint64_t seed, std::size_t resolution,
                            std::function<bool(const Expression&)> accept) {
  for (std::uint64_t retry = 0;; ++retry) {
    const std::uint64_t s = retry == 0 ? seed : derive_seed(seed, 99, retry);
    std::mt19937_64 rng(derive_seed(s, 7, 0));
    GenerateOptions options;
    options.resolution = resolution;
    options.objects = static_cast<std::size_t>(uniform_int(rng, 2, 5));
    options.accept = accept;
    try {
      return generate(s, options);
    } catch (const GenerationError&) {
      if (retry >= 16) throw;
    }
  }
}

}  // namespace

RefSample generate_train(std::uint64_t seed, std::size_t resolution) {
  return generate_filtered(seed, resolution,
                           [](const Expression& e) { return !is_holdout(e); });
}

RefSample generate_test(std::uint64_t seed, std::size_t index,
                        std::size_t resolution) {
  if (index % 2 == 1) {
    return generate_filtered(seed, resolution,
                             [](const Expression& e) { return is_holdout(e); });
  }
  return generate_filtered(seed, resolution, nullptr);
}

Split generate_split(std::uint64_t seed, std::size_t n_train,
                     std::size_t n_test, std::size_t resolution) {
  Split split;
  split.train.reserve(n_train);
  split.test.reserve(n_test);
  char id[32];
  for (std::size_t i = 0; i < n_train; ++i) {
    auto s = generate_train(derive_seed(seed, 1, i), resolution);
    std::snprintf(id, sizeof id, "train_%06zu", i);
    s.id = id;
    split.train.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    auto s = generate_test(derive_seed(seed, 2, i), i, resolution);
    std::snprintf(id, sizeof id, "test_%06zu", i);
    s.id = id;
    split.test.push_back(std::move(s));
  }
  return split;
}

std::string scene_json(const RefSample& sample) {
  nlohmann::json j;
  j["id"] = sample.id;
  j["resolution"] = sample.scene.resolution;
  j["referent"] = sample.referent;
  j["template_id"] = static_cast<int>(sample.expression.kind);
  j["seed"] = sample.seed;
  auto& objs = j["objects"];
  objs = nlohmann::json::array();
  for (const auto& o : sample.scene.objects) {
    objs.push_back({{"shape", name(o.shape)},
                    {"color", name(o.color)},
                    {"size", name(o.size)},
                    {"cx", o.cx},
                    {"cy", o.cy},
                    {"radius", o.radius}});
  }
  return j.dump();
}

void write_split(const Split& split, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  auto dump = [&](const std::vector<RefSample>& samples, const std::string& name) {
    std::ofstream manifest(dir / (name + ".jsonl"));
    std::ofstream scenes(dir / (name + "_scenes.jsonl"));
    if (!manifest || !scenes) {
      throw GenerationError("cannot write manifest in " + dir.string());
    }
    for (const auto& s : samples) {
      const std::string image_rel = "images/" + s.id + ".ppm";
      const std::string mask_rel = "masks/" + s.id + ".pgm";
      write_ppm(dir / image_rel, s.image);
      write_pgm(dir / mask_rel, s.mask);
      nlohmann::json row;
      row["id"] = s.id;
      row["image_path"] = image_rel;
      row["mask_path"] = mask_rel;
      row["expression"] = s.expression.text();
      row["template_id"] = static_cast<int>(s.expression.kind);
      row["seed"] = s.seed;
      manifest << row.dump() << '\n';
      scenes << scene_json(s) << '\n';
    }
  };
  dump(split.train, "train");
  dump(split.test, "test");
  grammar_vocabulary().save(dir / "vocab.txt");
}

}  // namespace shnet::synth

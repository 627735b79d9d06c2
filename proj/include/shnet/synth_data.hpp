#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shnet/image_io.hpp"
#include "shnet/tensor.hpp"
#include "shnet/text_encoder.hpp"

namespace shnet::synth {

enum class ShapeKind { kCircle, kSquare, kTriangle };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class SizeClass { kSmall, kBig };

inline constexpr std::size_t kShapeKinds = 3;
inline constexpr std::size_t kColors = 4;

std::string_view name(ShapeKind s);
std::string_view name(Color c);
std::string_view name(SizeClass s);
std::string_view ordinal_word(std::size_t k);  // 1-based

/// Integer center and radius; pixel (x, y) is sampled at (x + 0.5, y + 0.5),
/// so no pixel center ever lies exactly on a shape boundary.
///   circle:   (px - cx)^2 + (py - cy)^2 <= r^2
///   square:   |px - cx| <= r and |py - cy| <= r
///   triangle: apex (cx, cy - r), base corners (cx -/+ r, cy + r)
struct SceneObject {
  ShapeKind shape = ShapeKind::kCircle;
  Color color = Color::kRed;
  SizeClass size = SizeClass::kSmall;
  int cx = 0;
  int cy = 0;
  int radius = 0;
};

struct Scene {
  std::size_t resolution = 64;
  std::vector<SceneObject> objects;
};

enum class Template : std::uint8_t {
  kColorShape = 0,        // the <color> <shape>
  kShapeLeftOfShape = 1,  // the <shape> left of the <shape>
  kOrdinalFromLeft = 2,   // the <ordinal> <shape> from the left
  kSizeColorShape = 3,    // the <size> <color> <shape>
  kColorShapeAbove = 4,   // the <color> <shape> above the <color> <shape>
};
inline constexpr std::size_t kTemplates = 5;

/// A filled-in template. Only the slots the template uses are meaningful.
struct Expression {
  Template kind = Template::kColorShape;
  ShapeKind shape = ShapeKind::kCircle;
  Color color = Color::kRed;
  SizeClass size = SizeClass::kSmall;
  std::size_t ordinal = 1;
  ShapeKind other_shape = ShapeKind::kCircle;
  Color other_color = Color::kRed;

  std::vector<std::string> tokens() const;
  std::string text() const;
};

/// Indices of scene objects the expression describes.
///   left of: referent has the first shape and some *other* object with the
///            second shape has a larger cx.
///   above:   referent matches the first (color, shape) and some other object
///            matching the second has a larger cy.
///   ordinal: k-th smallest cx among objects of the shape.
std::vector<std::size_t> satisfiers(const Scene& scene, const Expression& expr);

/// Pixel indices (y * R + x) covered by one object, by scanline.
std::vector<std::size_t> rasterize(const SceneObject& object,
                                   std::size_t resolution);

/// Every word the grammar can emit.
const std::vector<std::string>& grammar_words();
Vocabulary grammar_vocabulary();

/// Compositional holdout: referent descriptions withheld from training.
bool is_holdout(const Expression& expr);

struct RefSample {
  std::string id;
  Image8 image;  // R x R RGB
  Image8 mask;   // R x R, 0/255
  Expression expression;
  std::vector<std::string> tokens;
  Scene scene;
  std::size_t referent = 0;
  std::uint64_t seed = 0;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  std::size_t resolution = 64;
  std::size_t objects = 3;  // in [2, 5]
  /// When set, only expressions accepted by the filter are emitted.
  std::function<bool(const Expression&)> accept;
};

inline constexpr std::size_t kMaxRejections = 1000;

/// Deterministic in (seed, options): same inputs give a bit-identical sample.
RefSample generate(std::uint64_t seed, const GenerateOptions& options);

/// n objects drawn from the seed, then generate(); training samples reject
/// held-out descriptions, and every other test sample is forced into one.
RefSample generate_train(std::uint64_t seed, std::size_t resolution);
RefSample generate_test(std::uint64_t seed, std::size_t index,
                        std::size_t resolution);

/// Independent sub-seed for (base, stream, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index);

struct Split {
  std::vector<RefSample> train;
  std::vector<RefSample> test;
};

Split generate_split(std::uint64_t seed, std::size_t n_train,
                     std::size_t n_test, std::size_t resolution);

/// Writes images/, masks/, train.jsonl, test.jsonl (manifest rows
/// {id, image_path, mask_path, expression, template_id, seed}), matching
/// scene sidecars train_scenes.jsonl / test_scenes.jsonl, and vocab.txt.
void write_split(const Split& split, const std::filesystem::path& dir);

std::string scene_json(const RefSample& sample);

}  // namespace shnet::synth

#ifndef SCOUT_SYNTHETIC_HPP
#define SCOUT_SYNTHETIC_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scout/dataset.hpp"
#include "scout/image.hpp"

namespace scout {

enum class Shape { kSquare, kDisc, kTriangle, kCross, kRing };

struct ShapeClass {
    std::string name;
    Shape shape;
    std::array<std::uint8_t, 3> color;
};

const std::vector<ShapeClass>& base_shape_classes();
const std::vector<ShapeClass>& novel_shape_classes();
/// Throws NotFound for an unknown name.
const ShapeClass& shape_class(const std::string& name);

/// Wrap-periodic texture: random muted cell colors (4 px cells at size 64),
/// bilinearly blended, plus a stripe pattern.
Image make_texture(int size, std::mt19937_64& rng);
Image roll_image(const Image& img, int dy, int dx);
void add_noise(Image& img, int amplitude, std::mt19937_64& rng);
/// Fills the shape so that its bounding box is exactly `box` (integer pixels).
void draw_shape(Image& img, const ShapeClass& cls, const Box& box);

using SceneFrame = LabelledImage;

/// Fresh texture with the given objects at random non-overlapping places.
SceneFrame make_object_scene(const std::string& frame_id, const std::vector<const ShapeClass*>& objects,
                             std::mt19937_64& rng, int size = 64);

/// `images` scenes; every image holds one object of a class cycled in order
/// and, every other image, a second object of a random class.
std::vector<SceneFrame> make_labelled_set(const std::vector<ShapeClass>& classes, int images, std::uint64_t seed,
                                          const std::string& prefix, int size = 64);

struct MissionSpec {
    int frames = 200;
    int warmup = 20;
    double novel_fraction = 0.1;
    int textures = 3;
    int views_per_texture = 2;
    int image_size = 64;
    int noise = 4;
    std::uint64_t seed = 1;
};

/// Background frames revisit a few fixed views (a texture at a fixed
/// circular shift) with light noise; warmup cycles through every view. A
/// fraction of post-warmup frames is a fresh texture carrying one
/// novel-class object (classes alternate). Only those are interesting.
std::vector<SceneFrame> generate_mission(const MissionSpec& spec);

/// PNG per frame (frame_id.png) plus annotations.jsonl.
void write_scene_dataset(const std::filesystem::path& dir, const std::vector<SceneFrame>& frames);

/// Labelled scenes of the base classes used to build the pretrained head.
std::vector<SceneFrame> make_base_set(int images, std::uint64_t seed, int size = 64);

} // namespace scout

#endif // SCOUT_SYNTHETIC_HPP

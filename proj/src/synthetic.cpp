#include "scout/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scout/metrics.hpp"

namespace scout {

namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

bool inside(Shape shape, double u, double v) {
    // u, v in [0, 1] across the bounding box, v downwards.
    switch (shape) {
    case Shape::kSquare:
        return true;
    case Shape::kDisc: {
        const double du = u - 0.5, dv = v - 0.5;
        return du * du + dv * dv <= 0.25;
    }
    case Shape::kTriangle:
        return std::abs(u - 0.5) <= 0.5 * v;
    case Shape::kCross:
        return (u >= 1.0 / 3.0 && u <= 2.0 / 3.0) || (v >= 1.0 / 3.0 && v <= 2.0 / 3.0);
    case Shape::kRing: {
        const double du = u - 0.5, dv = v - 0.5;
        const double r2 = du * du + dv * dv;
        return r2 <= 0.25 && r2 >= 0.09;
    }
    }
    return false;
}

} // namespace

const std::vector<ShapeClass>& base_shape_classes() {
    static const std::vector<ShapeClass> classes{
        {"square", Shape::kSquare, {220, 40, 40}},
        {"disc", Shape::kDisc, {40, 200, 60}},
        {"triangle", Shape::kTriangle, {50, 80, 230}},
    };
    return classes;
}

const std::vector<ShapeClass>& novel_shape_classes() {
    static const std::vector<ShapeClass> classes{
        {"cross", Shape::kCross, {235, 220, 30}},
        {"ring", Shape::kRing, {215, 45, 205}},
    };
    return classes;
}

const ShapeClass& shape_class(const std::string& name) {
    for (const auto* set : {&base_shape_classes(), &novel_shape_classes()}) {
        for (const auto& c : *set) {
            if (c.name == name) return c;
        }
    }
    throw NotFound("unknown shape class " + name);
}

Image make_texture(int size, std::mt19937_64& rng) {
    const int cells = std::max(1, size / 4);
    std::uniform_real_distribution<double> level(70.0, 170.0), tint(-15.0, 15.0), unit(0.0, 1.0);
    std::vector<std::array<double, 3>> grid(static_cast<std::size_t>(cells * cells));
    for (auto& cell : grid) {
        const double g = level(rng);
        for (double& ch : cell) ch = g + tint(rng);
    }
    const int fx = 1 + static_cast<int>(rng() % 4), fy = static_cast<int>(rng() % 4);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double amplitude = 15.0 + 20.0 * unit(rng);

    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double gx = static_cast<double>(x) * cells / size, gy = static_cast<double>(y) * cells / size;
            const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
            const double ax = gx - x0, ay = gy - y0;
            const int x1 = (x0 + 1) % cells, y1 = (y0 + 1) % cells;
            const double stripe =
                amplitude * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) / size + phase);
            for (int ch = 0; ch < 3; ++ch) {
                const double v = (1 - ax) * (1 - ay) * grid[y0 * cells + x0][ch] +
                                 ax * (1 - ay) * grid[y0 * cells + x1][ch] +
                                 (1 - ax) * ay * grid[y1 * cells + x0][ch] + ax * ay * grid[y1 * cells + x1][ch];
                img.at(x, y, ch) = clamp_byte(v + stripe);
            }
        }
    }
    return img;
}

Image roll_image(const Image& img, int dy, int dx) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        const int sy = ((y - dy) % img.height + img.height) % img.height;
        for (int x = 0; x < img.width; ++x) {
            const int sx = ((x - dx) % img.width + img.width) % img.width;
            for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = img.at(sx, sy, ch);
        }
    }
    return out;
}

void add_noise(Image& img, int amplitude, std::mt19937_64& rng) {
    if (amplitude <= 0) return;
    std::uniform_int_distribution<int> u(-amplitude, amplitude);
    for (auto& b : img.rgb) b = clamp_byte(b + u(rng));
}

void draw_shape(Image& img, const ShapeClass& cls, const Box& box) {
    const int x0 = static_cast<int>(box.x_min), y0 = static_cast<int>(box.y_min);
    const int x1 = static_cast<int>(box.x_max), y1 = static_cast<int>(box.y_max);
    if (x0 < 0 || y0 < 0 || x1 > img.width || y1 > img.height || x1 <= x0 || y1 <= y0) {
        throw InvalidInput("shape box outside the image");
    }
    const double w = x1 - x0, h = y1 - y0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            // Pixel centers, stretched so the outermost pixels reach u, v = 0 and 1.
            const double u = w > 1 ? (x - x0) / (w - 1) : 0.5;
            const double v = h > 1 ? (y - y0) / (h - 1) : 0.5;
            if (!inside(cls.shape, u, v)) continue;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = cls.color[ch];
        }
    }
}

SceneFrame make_object_scene(const std::string& frame_id, const std::vector<const ShapeClass*>& objects,
                             std::mt19937_64& rng, int size) {
    SceneFrame scene{make_texture(size, rng), {frame_id, !objects.empty(), {}}};
    const int lo = std::max(4, size * 9 / 32), hi = std::max(lo, size * 15 / 32);
    std::uniform_int_distribution<int> extent(lo, hi);
    for (const ShapeClass* cls : objects) {
        Box placed;
        for (int attempt = 0; attempt < 100; ++attempt) {
            const int w = extent(rng), h = extent(rng);
            const int x = std::uniform_int_distribution<int>(0, size - w)(rng);
            const int y = std::uniform_int_distribution<int>(0, size - h)(rng);
            placed = Box{double(x), double(y), double(x + w), double(y + h)};
            const bool clear = std::none_of(scene.annotation.boxes.begin(), scene.annotation.boxes.end(),
                                            [&](const ObjectBox& o) { return iou(o.box, placed) > 0.0; });
            if (clear) break;
        }
        draw_shape(scene.image, *cls, placed);
        scene.annotation.boxes.push_back({cls->name, placed});
    }
    return scene;
}

std::vector<SceneFrame> make_labelled_set(const std::vector<ShapeClass>& classes, int images, std::uint64_t seed,
                                          const std::string& prefix, int size) {
    if (classes.empty()) throw InvalidInput("no classes for a labelled set");
    std::mt19937_64 rng(seed);
    std::vector<SceneFrame> out;
    for (int i = 0; i < images; ++i) {
        std::vector<const ShapeClass*> objects{&classes[static_cast<std::size_t>(i) % classes.size()]};
        if (i % 2 == 1) objects.push_back(&classes[rng() % classes.size()]);
        char id[64];
        std::snprintf(id, sizeof id, "%s_%04d", prefix.c_str(), i);
        out.push_back(make_object_scene(id, objects, rng, size));
    }
    return out;
}

std::vector<SceneFrame> generate_mission(const MissionSpec& spec) {
    if (spec.frames <= 0 || spec.textures <= 0 || spec.warmup < 0 || spec.warmup > spec.frames) {
        throw InvalidInput("invalid mission spec");
    }
    std::mt19937_64 rng(spec.seed);
    // Views are whole-cell shifts of each texture.
    const int cell = std::max(1, spec.image_size / 16);
    const int steps = spec.image_size / cell;
    std::vector<Image> views;
    for (int i = 0; i < spec.textures; ++i) {
        const Image tex = make_texture(spec.image_size, rng);
        for (int v = 0; v < std::max(1, spec.views_per_texture); ++v) {
            const int dy = cell * static_cast<int>(rng() % steps), dx = cell * static_cast<int>(rng() % steps);
            views.push_back(roll_image(tex, dy, dx));
        }
    }

    std::vector<int> post;
    for (int i = spec.warmup; i < spec.frames; ++i) post.push_back(i);
    std::shuffle(post.begin(), post.end(), rng);
    const auto n_novel = std::min<std::size_t>(
        post.size(), static_cast<std::size_t>(std::lround(spec.novel_fraction * spec.frames)));
    std::vector<bool> novel(static_cast<std::size_t>(spec.frames), false);
    for (std::size_t k = 0; k < n_novel; ++k) novel[static_cast<std::size_t>(post[k])] = true;

    std::vector<SceneFrame> out;
    int novel_seen = 0;
    for (int i = 0; i < spec.frames; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "frame_%05d", i);
        if (novel[static_cast<std::size_t>(i)]) {
            const auto& classes = novel_shape_classes();
            const auto& cls = classes[static_cast<std::size_t>(novel_seen++) % classes.size()];
            SceneFrame s = make_object_scene(id, {&cls}, rng, spec.image_size);
            add_noise(s.image, spec.noise, rng);
            out.push_back(std::move(s));
            continue;
        }
        const std::size_t view = i < spec.warmup ? static_cast<std::size_t>(i) % views.size() : rng() % views.size();
        SceneFrame s{views[view], {id, false, {}}};
        add_noise(s.image, spec.noise, rng);
        out.push_back(std::move(s));
    }
    return out;
}

void write_scene_dataset(const std::filesystem::path& dir, const std::vector<SceneFrame>& frames) {
    std::filesystem::create_directories(dir);
    std::vector<FrameAnnotation> annotations;
    for (const auto& f : frames) {
        save_png((dir / (f.annotation.frame + ".png")).string(), f.image);
        annotations.push_back(f.annotation);
    }
    write_annotations(dir / "annotations.jsonl", annotations);
}

std::vector<SceneFrame> make_base_set(int images, std::uint64_t seed, int size) {
    return make_labelled_set(base_shape_classes(), images, seed, "base", size);
}

} // namespace scout

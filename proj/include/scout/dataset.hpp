#ifndef SCOUT_DATASET_HPP
#define SCOUT_DATASET_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scout/image.hpp"
#include "scout/tensor.hpp"

namespace scout {

struct ObjectBox {
    std::string class_name;
    Box box;

    friend bool operator==(const ObjectBox&, const ObjectBox&) = default;
};

/// One line of annotations.jsonl:
/// {"frame": id, "interesting": bool, "boxes": [{"class", "x", "y", "w", "h"}]}.
struct FrameAnnotation {
    std::string frame;
    bool interesting = false;
    std::vector<ObjectBox> boxes;

    friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

using AnnotationMap = std::map<std::string, FrameAnnotation>;

nlohmann::json annotation_to_json(const FrameAnnotation& a);
FrameAnnotation annotation_from_json(const nlohmann::json& j);

/// Throws IoError when unreadable and InvalidInput on a malformed line.
AnnotationMap read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& annotations);

/// A mission stream on disk: image files in lexicographic order plus
/// optional annotations. Frame ids are file stems.
struct Dataset {
    std::filesystem::path root;
    std::vector<std::filesystem::path> images;
    AnnotationMap annotations;

    std::size_t size() const { return images.size(); }
    static std::string frame_id(const std::filesystem::path& image) { return image.stem().string(); }
};

/// Throws IoError for a missing directory or one without images.
Dataset open_dataset(const std::filesystem::path& dir);

struct LabelledImage {
    Image image;
    FrameAnnotation annotation;
};

/// Every image of the dataset with its annotation (an empty one when the
/// frame has no line in annotations.jsonl).
std::vector<LabelledImage> load_labelled(const Dataset& ds);

} // namespace scout

#endif // SCOUT_DATASET_HPP

#include "scout/dataset.hpp"

#include <algorithm>
#include <fstream>

namespace scout {

nlohmann::json annotation_to_json(const FrameAnnotation& a) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : a.boxes) {
        boxes.push_back({{"class", b.class_name},
                         {"x", b.box.x_min},
                         {"y", b.box.y_min},
                         {"w", b.box.width()},
                         {"h", b.box.height()}});
    }
    return {{"frame", a.frame}, {"interesting", a.interesting}, {"boxes", boxes}};
}

FrameAnnotation annotation_from_json(const nlohmann::json& j) {
    try {
        FrameAnnotation a;
        a.frame = j.at("frame").get<std::string>();
        a.interesting = j.value("interesting", false);
        if (j.contains("boxes")) {
            for (const auto& b : j["boxes"]) {
                const double x = b.at("x").get<double>(), y = b.at("y").get<double>();
                const Box box{x, y, x + b.at("w").get<double>(), y + b.at("h").get<double>()};
                if (!box.valid()) throw InvalidInput("annotation box for " + a.frame + " is empty");
                a.boxes.push_back({b.at("class").get<std::string>(), box});
            }
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed annotation: ") + e.what());
    }
}

AnnotationMap read_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read annotations " + path.string());
    AnnotationMap out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw InvalidInput(path.string() + ":" + std::to_string(number) + ": not valid JSON");
        }
        auto a = annotation_from_json(j);
        out[a.frame] = std::move(a);
    }
    return out;
}

void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& annotations) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write annotations " + path.string());
    for (const auto& a : annotations) out << annotation_to_json(a).dump() << '\n';
    if (!out) throw IoError("failed writing annotations " + path.string());
}

Dataset open_dataset(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("dataset directory not found: " + dir.string());
    Dataset ds;
    ds.root = dir;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") ds.images.push_back(entry.path());
    }
    if (ds.images.empty()) throw IoError("no images in dataset " + dir.string());
    std::sort(ds.images.begin(), ds.images.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    const auto ann = dir / "annotations.jsonl";
    if (std::filesystem::exists(ann)) ds.annotations = read_annotations(ann);
    return ds;
}

std::vector<LabelledImage> load_labelled(const Dataset& ds) {
    std::vector<LabelledImage> out;
    out.reserve(ds.size());
    for (const auto& path : ds.images) {
        const std::string id = Dataset::frame_id(path);
        const auto it = ds.annotations.find(id);
        out.push_back({load_image(path.string()), it != ds.annotations.end() ? it->second : FrameAnnotation{id}});
    }
    return out;
}

} // namespace scout

#include "fracseg/via.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "fracseg/error.hpp"

namespace fracseg::via {

namespace {

// ordered_json keeps document order for object-shaped region maps; the
// default json sorts keys and would put region "10" before region "2",
// breaking the last-wins overlap rule.
using json = nlohmann::ordered_json;

bool label_to_id(const std::string& label, std::uint8_t& id) {
    if (label == "background") {
        id = kBackgroundId;
    } else if (label == "intergranular") {
        id = kIntergranularId;
    } else if (label == "transgranular") {
        id = kTransgranularId;
    } else {
        return false;
    }
    return true;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// The label attribute name is user-defined in VIA projects. Preferred names
// are tried first; otherwise a single string-valued attribute is accepted.
std::string extract_label(const json& region_attributes, const std::string& where) {
    for (const char* key : {"label", "class", "type", "fracture_mode"}) {
        auto it = region_attributes.find(key);
        if (it != region_attributes.end() && it->is_string()) {
            return trim(it->get<std::string>());
        }
    }
    std::string found;
    int string_attrs = 0;
    for (const auto& [key, value] : region_attributes.items()) {
        if (value.is_string()) {
            ++string_attrs;
            found = trim(value.get<std::string>());
        }
    }
    if (string_attrs == 1) return found;
    throw DataError(where + ": cannot identify the class label in region_attributes (" +
                    std::to_string(string_attrs) + " string attributes, none named label/class)");
}

void parse_region(const json& region, const std::string& where, ImageAnnotations& entry,
                  std::vector<std::string>& warnings, std::set<std::string>& unknown_labels) {
    if (!region.is_object() || !region.contains("shape_attributes")) {
        throw DataError(where + ": region without shape_attributes");
    }
    const json& shape = region.at("shape_attributes");
    const std::string shape_name = shape.value("name", "");
    if (shape_name != "polygon") {
        warnings.push_back(where + ": skipped non-polygon region (shape \"" + shape_name + "\")");
        return;
    }
    if (!shape.contains("all_points_x") || !shape.contains("all_points_y")) {
        throw DataError(where + ": polygon without all_points_x/all_points_y");
    }

    Polygon poly;
    poly.xs = shape.at("all_points_x").get<std::vector<double>>();
    poly.ys = shape.at("all_points_y").get<std::vector<double>>();
    if (poly.xs.size() != poly.ys.size()) {
        throw DataError(where + ": all_points_x has " + std::to_string(poly.xs.size()) +
                        " entries, all_points_y has " + std::to_string(poly.ys.size()));
    }
    if (poly.xs.size() < 3) {
        warnings.push_back(where + ": skipped polygon with " + std::to_string(poly.xs.size()) +
                           " vertices");
        return;
    }

    const std::string label =
        extract_label(region.value("region_attributes", json::object()), where);
    std::uint8_t id;
    if (!label_to_id(label, id)) {
        unknown_labels.insert(label);
        return;
    }
    entry.regions.push_back({std::move(poly), id, label});
}

} // namespace

AnnotationProject parse_via_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError("annotation JSON is malformed: " + std::string(e.what()));
    }

    if (doc.contains("_via_img_metadata")) doc = doc.at("_via_img_metadata");
    if (!doc.is_object()) {
        throw DataError("annotation JSON: expected an object of per-image records");
    }

    AnnotationProject project;
    std::set<std::string> unknown_labels;
    for (const auto& [key, record] : doc.items()) {
        if (!record.is_object() || !record.contains("filename")) {
            // VIA exports carry bookkeeping keys (settings, attributes) next
            // to the image records when the whole project is saved.
            if (key.rfind("_via", 0) == 0) continue;
            throw DataError("annotation JSON: record \"" + key + "\" has no filename");
        }
        const std::string filename = record.at("filename").get<std::string>();
        ImageAnnotations& entry = project.entries[filename];
        entry.filename = filename;

        if (!record.contains("regions")) continue;
        const json& regions = record.at("regions");
        int index = 0;
        auto handle = [&](const json& region) {
            parse_region(region, filename + " region " + std::to_string(index), entry,
                         project.warnings, unknown_labels);
            ++index;
        };
        if (regions.is_array()) {
            for (const auto& region : regions) handle(region);
        } else if (regions.is_object()) {
            for (const auto& [rkey, region] : regions.items()) handle(region);
        } else {
            throw DataError(filename + ": regions is neither an array nor an object");
        }
    }

    if (!unknown_labels.empty()) {
        std::ostringstream msg;
        msg << "annotation JSON contains unknown class labels:";
        for (const auto& label : unknown_labels) msg << " \"" << label << "\"";
        msg << " (allowed: background, intergranular, transgranular)";
        throw DataError(msg.str());
    }
    return project;
}

AnnotationProject parse_via_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_via_json(buf.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace fracseg::via

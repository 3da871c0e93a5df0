/**
 * @file labels.hpp
 * @brief Scene labels, label filters, and the JSON label sidecar.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>

#include "atomic_file.hpp"
#include "error.hpp"

namespace polarcube {

enum class Environment { indoor, outdoor };
enum class Illumination { sunlight, cloudy, white, incandescent };
enum class SceneType { object, scene };

struct LabelSet {
    Environment environment = Environment::indoor;
    Illumination illumination = Illumination::white;
    std::string capture_time;  ///< ISO-8601
    SceneType scene_type = SceneType::scene;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

/// Sidecar document: labels plus free-form metadata.
struct LabelSidecar {
    LabelSet labels;
    std::string notes;
    std::string rig;

    friend bool operator==(const LabelSidecar&, const LabelSidecar&) = default;
};

namespace detail {
template <typename E, std::size_t N>
struct EnumNames {
    std::array<std::pair<E, std::string_view>, N> entries;

    std::string_view name(E e) const {
        for (const auto& [v, n] : entries)
            if (v == e) return n;
        return "?";
    }
    std::optional<E> parse(std::string_view s) const {
        for (const auto& [v, n] : entries)
            if (n == s) return v;
        return std::nullopt;
    }
};

inline constexpr EnumNames<Environment, 2> kEnvironmentNames{{{{Environment::indoor, "indoor"}, {Environment::outdoor, "outdoor"}}}};
inline constexpr EnumNames<Illumination, 4> kIlluminationNames{{{{Illumination::sunlight, "sunlight"},
                                                                  {Illumination::cloudy, "cloudy"},
                                                                  {Illumination::white, "white"},
                                                                  {Illumination::incandescent, "incandescent"}}}};
inline constexpr EnumNames<SceneType, 2> kSceneTypeNames{{{{SceneType::object, "object"}, {SceneType::scene, "scene"}}}};
} // namespace detail

inline std::string_view to_string(Environment e) { return detail::kEnvironmentNames.name(e); }
inline std::string_view to_string(Illumination e) { return detail::kIlluminationNames.name(e); }
inline std::string_view to_string(SceneType e) { return detail::kSceneTypeNames.name(e); }

inline Environment parse_environment(std::string_view s) {
    if (auto v = detail::kEnvironmentNames.parse(s)) return *v;
    throw IoError("label schema: unknown environment '" + std::string(s) + "'");
}
inline Illumination parse_illumination(std::string_view s) {
    if (auto v = detail::kIlluminationNames.parse(s)) return *v;
    throw IoError("label schema: unknown illumination '" + std::string(s) + "'");
}
inline SceneType parse_scene_type(std::string_view s) {
    if (auto v = detail::kSceneTypeNames.parse(s)) return *v;
    throw IoError("label schema: unknown scene_type '" + std::string(s) + "'");
}

inline bool is_iso8601(const std::string& s) {
    static const std::regex re(R"(^\d{4}-\d{2}-\d{2}(T\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?)?$)");
    return std::regex_match(s, re);
}

/// Empty sets accept everything; otherwise the label must be a member.
struct LabelFilter {
    std::set<Environment> environments;
    std::set<Illumination> illuminations;
    std::set<SceneType> scene_types;

    bool unrestricted() const { return environments.empty() && illuminations.empty() && scene_types.empty(); }

    /// Images without labels pass only an unrestricted filter.
    bool accepts(const std::optional<LabelSet>& labels) const {
        if (unrestricted()) return true;
        if (!labels) return false;
        if (!environments.empty() && !environments.contains(labels->environment)) return false;
        if (!illuminations.empty() && !illuminations.contains(labels->illumination)) return false;
        if (!scene_types.empty() && !scene_types.contains(labels->scene_type)) return false;
        return true;
    }
};

inline nlohmann::json to_json(const LabelSidecar& s) {
    nlohmann::json j;
    j["environment"] = std::string(to_string(s.labels.environment));
    j["illumination"] = std::string(to_string(s.labels.illumination));
    j["capture_time"] = s.labels.capture_time;
    j["scene_type"] = std::string(to_string(s.labels.scene_type));
    j["notes"] = s.notes;
    j["rig"] = s.rig;
    return j;
}

inline LabelSidecar sidecar_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw IoError("label schema: document must be an object");
    auto field = [&](const char* name) -> std::string {
        if (!j.contains(name)) throw IoError(std::string("label schema: missing field '") + name + "'");
        if (!j.at(name).is_string()) throw IoError(std::string("label schema: field '") + name + "' must be a string");
        return j.at(name).get<std::string>();
    };
    LabelSidecar s;
    s.labels.environment = parse_environment(field("environment"));
    s.labels.illumination = parse_illumination(field("illumination"));
    s.labels.capture_time = field("capture_time");
    if (!is_iso8601(s.labels.capture_time))
        throw IoError("label schema: capture_time '" + s.labels.capture_time + "' is not ISO-8601");
    s.labels.scene_type = parse_scene_type(field("scene_type"));
    if (j.contains("notes")) s.notes = field("notes");
    if (j.contains("rig")) s.rig = field("rig");
    return s;
}

inline void write_labels(const std::string& path, const LabelSidecar& sidecar) {
    atomic_write_file(path, to_json(sidecar).dump(2) + "\n");
}

inline void write_labels(const std::string& path, const LabelSet& labels) { write_labels(path, LabelSidecar{labels, {}, {}}); }

inline LabelSidecar read_label_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_labels: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("read_labels: malformed document " + path + ": " + e.what());
    }
    return sidecar_from_json(j);
}

inline LabelSet read_labels(const std::string& path) { return read_label_sidecar(path).labels; }

} // namespace polarcube

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "radfuse/core.hpp"
#include "radfuse/csv.hpp"

namespace radfuse {

struct ExamRecord {
    std::string patient_id;
    int year = 0;
    Laterality laterality = Laterality::Right;
    ViewKind view_kind = ViewKind::CC;
    double age_years = 0.0;
    int label = 0;
    double pixel_spacing_mm = 0.1;
    std::string image_path;  // resolved against the manifest's directory

    ViewMeta meta() const { return ViewMeta{laterality, view_kind, age_years, year}; }
};

// (patient, laterality, view) identifies one image.
struct ViewKey {
    std::string patient_id;
    Laterality laterality = Laterality::Right;
    ViewKind view_kind = ViewKind::CC;

    auto operator<=>(const ViewKey&) const = default;
};

inline ViewKey key_of(const ExamRecord& r) { return {r.patient_id, r.laterality, r.view_kind}; }

inline std::string describe(const ViewKey& k) {
    return k.patient_id + "/" + to_char(k.laterality) + "/" + to_string(k.view_kind);
}

inline const std::vector<std::string>& manifest_header() {
    static const std::vector<std::string> h = {"patient_id", "year",  "laterality",       "view",
                                               "age",        "label", "pixel_spacing_mm", "image_path"};
    return h;
}

// Canonical order: patient, laterality, view. Downstream results never depend on
// the manifest's row order.
inline void sort_records(std::vector<ExamRecord>& records) {
    std::sort(records.begin(), records.end(),
              [](const ExamRecord& a, const ExamRecord& b) { return key_of(a) < key_of(b); });
}

inline void validate_records(const std::vector<ExamRecord>& records, const std::vector<int>& line_numbers) {
    auto line = [&](std::size_t i) { return i < line_numbers.size() ? line_numbers[i] : static_cast<int>(i + 2); };
    std::map<ViewKey, std::size_t> seen;
    struct PatientInfo {
        int label, year;
        std::size_t first, views;
    };
    std::map<std::string, PatientInfo> patients;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto [it, inserted] = seen.emplace(key_of(r), i);
        if (!inserted)
            throw Error("manifest: duplicate view " + describe(key_of(r)) + " on rows " + std::to_string(line(it->second)) +
                        " and " + std::to_string(line(i)));
        auto [pit, fresh] = patients.emplace(r.patient_id, PatientInfo{r.label, r.year, i, 0});
        if (!fresh) {
            if (pit->second.label != r.label)
                throw Error("manifest: patient " + r.patient_id + " has inconsistent labels on rows " +
                            std::to_string(line(pit->second.first)) + " and " + std::to_string(line(i)));
            if (pit->second.year != r.year)
                throw Error("manifest: patient " + r.patient_id + " has inconsistent years on rows " +
                            std::to_string(line(pit->second.first)) + " and " + std::to_string(line(i)));
        }
        if (++pit->second.views > 4) throw Error("manifest: patient " + r.patient_id + " has more than 4 views");
    }
}

inline std::vector<ExamRecord> parse_manifest(const std::string& path) {
    const csv::Table t = csv::read(path);
    csv::require_header(t, manifest_header(), path);
    const auto base = std::filesystem::path(path).parent_path();
    std::vector<ExamRecord> records;
    records.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& f = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        try {
            ExamRecord r;
            r.patient_id = f[0];
            if (r.patient_id.empty()) throw Error("empty patient_id");
            r.year = static_cast<int>(csv::parse_int(f[1], "year"));
            r.laterality = parse_laterality(f[2]);
            r.view_kind = parse_view_kind(f[3]);
            r.age_years = csv::parse_double(f[4], "age");
            if (!(r.age_years >= 0)) throw Error("age must be non-negative");
            const auto label = csv::parse_int(f[5], "label");
            if (label != 0 && label != 1) throw Error("label must be 0 or 1");
            r.label = static_cast<int>(label);
            r.pixel_spacing_mm = csv::parse_double(f[6], "pixel_spacing_mm");
            if (!(r.pixel_spacing_mm > 0)) throw Error("pixel_spacing_mm must be positive");
            const std::filesystem::path img(f[7]);
            r.image_path = img.is_absolute() || base.empty() ? img.string() : (base / img).string();
            records.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    validate_records(records, t.line_numbers);
    return records;
}

inline std::string format_manifest_row(const ExamRecord& r, const std::string& image_field) {
    return csv::join({r.patient_id, std::to_string(r.year), std::string(1, to_char(r.laterality)), to_string(r.view_kind),
                      csv::format(r.age_years), std::to_string(r.label), csv::format(r.pixel_spacing_mm), image_field});
}

}  // namespace radfuse

#pragma once

#include "error.hpp"
#include "fmx.hpp"
#include "synset.hpp"
#include "text.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace semdec {

/// One fMRI run: voxels x volumes.
struct VolumeSeries {
    std::string run_id;
    Eigen::MatrixXd data;
    double tr_seconds = 3.0;
    std::vector<std::string> voxel_ids;

    Eigen::Index voxels() const { return data.rows(); }
    Eigen::Index volumes() const { return data.cols(); }
};

struct StimulusEvent {
    std::string run_id;
    std::size_t onset_volume = 0;
    std::size_t n_volumes = 3;
    std::string image_id;
    SynsetRef synset;
};

/// Preprocessed trials x voxels, one label and image id per row.
struct TrialMatrix {
    Eigen::MatrixXd data;
    std::vector<SynsetRef> labels;
    std::vector<std::string> image_ids;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

/// Items x features; labels are optional (regression targets need none, an index needs them).
struct FeatureMatrix {
    Eigen::MatrixXd data;
    std::vector<std::string> item_ids;
    std::optional<std::vector<SynsetRef>> labels;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const std::string& what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (!std::isfinite(m(r, c))) {
                throw FormatError(what + ": non-finite entry at (" + std::to_string(r) + ", " + std::to_string(c) +
                                  ")");
            }
        }
    }
}

} // namespace detail

inline void validate(const VolumeSeries& run) {
    if (run.data.rows() < 1 || run.data.cols() < 1) {
        throw ShapeError("run '" + run.run_id + "' is empty");
    }
    if (!(run.tr_seconds > 0.0)) {
        throw FormatError("run '" + run.run_id + "': tr_seconds must be positive");
    }
    if (!run.voxel_ids.empty() && run.voxel_ids.size() != static_cast<std::size_t>(run.data.rows())) {
        throw ShapeError("run '" + run.run_id + "': voxel id count does not match rows");
    }
    detail::require_finite(run.data, "run '" + run.run_id + "'");
}

inline void validate(const TrialMatrix& t) {
    if (t.labels.size() != static_cast<std::size_t>(t.data.rows()) ||
        t.image_ids.size() != static_cast<std::size_t>(t.data.rows())) {
        throw ShapeError("trial matrix has " + std::to_string(t.data.rows()) + " rows but " +
                         std::to_string(t.labels.size()) + " labels and " + std::to_string(t.image_ids.size()) +
                         " image ids");
    }
    detail::require_finite(t.data, "trial matrix");
}

inline void validate(const FeatureMatrix& m) {
    if (m.item_ids.size() != static_cast<std::size_t>(m.data.rows())) {
        throw ShapeError("feature matrix has " + std::to_string(m.data.rows()) + " rows but " +
                         std::to_string(m.item_ids.size()) + " ids");
    }
    if (m.labels && m.labels->size() != m.item_ids.size()) {
        throw ShapeError("feature matrix label count does not match rows");
    }
    detail::require_finite(m.data, "feature matrix");
}

inline FeatureMatrix as_features(const TrialMatrix& t) { return {t.data, t.image_ids, t.labels}; }

inline TrialMatrix as_trials(const FeatureMatrix& m) {
    if (!m.labels) {
        throw FormatError("trial matrix requires labels");
    }
    return {m.data, *m.labels, m.item_ids};
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

inline constexpr double zero_variance_eps = 1e-12;

/**
 * Standardizes every voxel timeseries of a run to zero mean and unit sample
 * standard deviation (N-1 denominator). Rows whose standard deviation is at
 * most 1e-12 become all zeros.
 */
inline VolumeSeries zscore_runwise(const VolumeSeries& run) {
    const Eigen::Index T = run.data.cols();
    if (T < 2) {
        throw DegenerateError("run '" + run.run_id + "' has " + std::to_string(T) +
                              " volume(s); z-scoring needs at least 2");
    }
    VolumeSeries out = run;
    for (Eigen::Index v = 0; v < run.data.rows(); ++v) {
        const auto row = run.data.row(v);
        const double mean = row.mean();
        const double ss = (row.array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(T - 1));
        if (sd <= zero_variance_eps) {
            out.data.row(v).setZero();
        } else {
            out.data.row(v) = (row.array() - mean) / sd;
        }
    }
    return out;
}

/**
 * Averages the volumes [onset + shift, onset + shift + n_volumes) of each event,
 * giving one trial row per event in event order. The run is used as given;
 * z-score it first.
 */
inline TrialMatrix window_average(const VolumeSeries& run, std::span<const StimulusEvent> events,
                                  std::size_t hrf_shift_volumes) {
    const auto T = static_cast<std::size_t>(run.data.cols());
    TrialMatrix out;
    out.data.resize(static_cast<Eigen::Index>(events.size()), run.data.rows());
    out.labels.reserve(events.size());
    out.image_ids.reserve(events.size());

    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        const std::string name = "event " + std::to_string(i) + " (image '" + ev.image_id + "')";
        if (ev.run_id != run.run_id) {
            throw OutOfBoundsError(name + " belongs to run '" + ev.run_id + "', not '" + run.run_id + "'");
        }
        if (ev.n_volumes == 0) {
            throw OutOfBoundsError(name + " has an empty window");
        }
        const std::size_t begin = ev.onset_volume + hrf_shift_volumes;
        if (begin + ev.n_volumes > T) {
            throw OutOfBoundsError(name + " window [" + std::to_string(begin) + ", " +
                                   std::to_string(begin + ev.n_volumes) + ") exceeds run '" + run.run_id +
                                   "' length " + std::to_string(T));
        }
        out.data.row(static_cast<Eigen::Index>(i)) =
            run.data.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(ev.n_volumes))
                .rowwise()
                .mean()
                .transpose();
        out.labels.push_back(ev.synset);
        out.image_ids.push_back(ev.image_id);
    }
    return out;
}

/**
 * Full per-subject preprocessing: z-score each run, then window-average every
 * event against its run. Rows follow the event list order.
 */
inline TrialMatrix preprocess(std::span<const VolumeSeries> runs, std::span<const StimulusEvent> events,
                              std::size_t hrf_shift_volumes) {
    std::map<std::string, VolumeSeries> normalized;
    Eigen::Index voxels = -1;
    for (const auto& run : runs) {
        if (voxels >= 0 && run.data.rows() != voxels) {
            throw ShapeError("run '" + run.run_id + "' has " + std::to_string(run.data.rows()) +
                             " voxels, expected " + std::to_string(voxels));
        }
        voxels = run.data.rows();
        if (!normalized.emplace(run.run_id, zscore_runwise(run)).second) {
            throw FormatError("duplicate run id '" + run.run_id + "'");
        }
    }

    TrialMatrix out;
    out.data.resize(static_cast<Eigen::Index>(events.size()), std::max<Eigen::Index>(voxels, 0));
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto it = normalized.find(events[i].run_id);
        if (it == normalized.end()) {
            throw OutOfBoundsError("event " + std::to_string(i) + " (image '" + events[i].image_id +
                                   "') references unknown run '" + events[i].run_id + "'");
        }
        auto row = window_average(it->second, events.subspan(i, 1), hrf_shift_volumes);
        out.data.row(static_cast<Eigen::Index>(i)) = row.data.row(0);
        out.labels.push_back(row.labels[0]);
        out.image_ids.push_back(row.image_ids[0]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature / trial / volume files
// ---------------------------------------------------------------------------

namespace detail {

inline bool has_csv_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv";
}

inline std::vector<std::string> string_array(const nlohmann::json& j, const char* key, std::size_t n,
                                             const std::string& source) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != n) {
        throw FormatError(source + ": header field '" + key + "' must be an array of " + std::to_string(n) +
                          " strings");
    }
    std::vector<std::string> out;
    out.reserve(n);
    for (const auto& v : j[key]) {
        if (!v.is_string()) {
            throw FormatError(source + ": non-string entry in '" + key + "'");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

inline std::optional<std::vector<SynsetRef>> label_array(const nlohmann::json& j, std::size_t n,
                                                         const std::string& source) {
    if (!j.contains("labels") || j["labels"].is_null()) {
        return std::nullopt;
    }
    std::vector<SynsetRef> out;
    for (auto& s : string_array(j, "labels", n, source)) {
        if (!SynsetRef::valid(s)) {
            throw FormatError(source + ": malformed synset id '" + s + "' in labels");
        }
        out.emplace_back(std::move(s));
    }
    return out;
}

inline nlohmann::json feature_header(const FeatureMatrix& m) {
    nlohmann::json h;
    h["ids"] = m.item_ids;
    if (m.labels) {
        nlohmann::json labels = nlohmann::json::array();
        for (const auto& l : *m.labels) {
            labels.push_back(l.str());
        }
        h["labels"] = std::move(labels);
    } else {
        h["labels"] = nullptr;
    }
    return h;
}

inline FeatureMatrix load_feature_csv(const std::filesystem::path& path) {
    const auto lines = text::read_lines(path.string());
    std::vector<std::string> ids;
    std::vector<SynsetRef> labels;
    std::vector<std::vector<double>> rows;
    std::optional<bool> labelled;

    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) {
            continue;
        }
        auto fields = text::split(line, ',');
        if (rows.empty() && ids.empty() && text::trim(fields[0]) == "id") {
            continue;
        }
        if (fields.size() < 2) {
            throw ParseError(path.string() + ": row needs an id and at least one value", ln + 1);
        }
        const bool has_label = !text::parse_double(fields[1]).has_value();
        if (labelled && *labelled != has_label) {
            throw ParseError(path.string() + ": label column present on some rows only", ln + 1);
        }
        labelled = has_label;

        ids.emplace_back(text::trim(fields[0]));
        std::size_t first = 1;
        if (has_label) {
            const std::string lab(text::trim(fields[1]));
            if (!SynsetRef::valid(lab)) {
                throw ParseError(path.string() + ": malformed synset id '" + lab + "'", ln + 1);
            }
            labels.emplace_back(lab);
            first = 2;
        }
        std::vector<double> values;
        for (std::size_t f = first; f < fields.size(); ++f) {
            const auto v = text::parse_double(fields[f]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError(path.string() + ": bad value '" + std::string(fields[f]) + "'", ln + 1);
            }
            values.push_back(*v);
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw ParseError(path.string() + ": ragged row", ln + 1);
        }
        rows.push_back(std::move(values));
    }

    FeatureMatrix out;
    const auto cols = rows.empty() ? 0 : rows.front().size();
    out.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    out.item_ids = std::move(ids);
    if (labelled.value_or(false)) {
        out.labels = std::move(labels);
    }
    return out;
}

inline void save_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (Eigen::Index r = 0; r < m.data.rows(); ++r) {
        out << m.item_ids[static_cast<std::size_t>(r)];
        if (m.labels) {
            out << ',' << (*m.labels)[static_cast<std::size_t>(r)].str();
        }
        for (Eigen::Index c = 0; c < m.data.cols(); ++c) {
            out << ',' << text::format_float(static_cast<float>(m.data(r, c)));
        }
        out << '\n';
    }
}

} // namespace detail

/// FMX1 container, or CSV when the extension is .csv. Values are stored as float32.
inline void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
    validate(m);
    if (detail::has_csv_extension(path)) {
        detail::save_feature_csv(m, path);
        return;
    }
    fmx::write(path, detail::feature_header(m), m.data);
}

inline FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
    if (detail::has_csv_extension(path)) {
        auto m = detail::load_feature_csv(path);
        validate(m);
        return m;
    }
    auto c = fmx::read(path);
    const auto n = static_cast<std::size_t>(c.data.rows());
    FeatureMatrix m;
    m.item_ids = detail::string_array(c.header, "ids", n, path.string());
    m.labels = detail::label_array(c.header, n, path.string());
    m.data = std::move(c.data);
    return m;
}

inline void save_trial_matrix(const TrialMatrix& t, const std::filesystem::path& path) {
    validate(t);
    save_feature_matrix(as_features(t), path);
}

inline TrialMatrix load_trial_matrix(const std::filesystem::path& path) {
    auto m = load_feature_matrix(path);
    if (!m.labels) {
        throw FormatError(path.string() + ": trial file carries no labels");
    }
    return as_trials(m);
}

inline void save_volume_series(const VolumeSeries& run, const std::filesystem::path& path) {
    validate(run);
    nlohmann::json h;
    h["run_id"] = run.run_id;
    h["tr_seconds"] = run.tr_seconds;
    if (run.voxel_ids.empty()) {
        std::vector<std::string> ids;
        for (Eigen::Index v = 0; v < run.data.rows(); ++v) {
            ids.push_back("v" + std::to_string(v));
        }
        h["ids"] = ids;
    } else {
        h["ids"] = run.voxel_ids;
    }
    h["labels"] = nullptr;
    fmx::write(path, h, run.data);
}

inline VolumeSeries load_volume_series(const std::filesystem::path& path) {
    auto c = fmx::read(path);
    VolumeSeries run;
    run.voxel_ids = detail::string_array(c.header, "ids", static_cast<std::size_t>(c.data.rows()), path.string());
    if (!c.header.contains("tr_seconds") || !c.header["tr_seconds"].is_number()) {
        throw FormatError(path.string() + ": volume series header lacks tr_seconds");
    }
    run.tr_seconds = c.header["tr_seconds"].get<double>();
    if (c.header.contains("run_id") && c.header["run_id"].is_string()) {
        run.run_id = c.header["run_id"].get<std::string>();
    } else {
        run.run_id = path.stem().string();
    }
    run.data = std::move(c.data);
    validate(run);
    return run;
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

inline std::vector<StimulusEvent> parse_events(std::istream& in, const std::string& source = "<events>") {
    static constexpr std::array<std::string_view, 5> required = {"run_id", "onset_volume", "n_volumes", "image_id",
                                                                 "synset_id"};
    std::string line;
    std::size_t ln = 0;
    std::array<std::size_t, 5> col{};
    bool have_header = false;
    std::size_t width = 0;
    std::vector<StimulusEvent> events;

    while (std::getline(in, line)) {
        ++ln;
        const auto sv = text::strip_cr(line);
        if (text::trim(sv).empty()) {
            continue;
        }
        const auto fields = text::split(sv, '\t');
        if (!have_header) {
            for (std::size_t r = 0; r < required.size(); ++r) {
                const auto it = std::find_if(fields.begin(), fields.end(),
                                             [&](std::string_view f) { return text::trim(f) == required[r]; });
                if (it == fields.end()) {
                    throw ParseError(source + ": missing column '" + std::string(required[r]) + "'", ln);
                }
                col[r] = static_cast<std::size_t>(it - fields.begin());
            }
            width = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != width) {
            throw ParseError(source + ": expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             ln);
        }

        StimulusEvent ev;
        ev.run_id = std::string(text::trim(fields[col[0]]));
        const auto onset = text::parse_int<std::int64_t>(fields[col[1]]);
        if (!onset || *onset < 0) {
            throw ParseError(source + ": onset_volume '" + std::string(fields[col[1]]) +
                                 "' is not a non-negative integer",
                             ln);
        }
        const auto nvol = text::parse_int<std::int64_t>(fields[col[2]]);
        if (!nvol || *nvol < 1) {
            throw ParseError(source + ": n_volumes '" + std::string(fields[col[2]]) + "' is not a positive integer",
                             ln);
        }
        ev.onset_volume = static_cast<std::size_t>(*onset);
        ev.n_volumes = static_cast<std::size_t>(*nvol);
        ev.image_id = std::string(text::trim(fields[col[3]]));
        const std::string syn(text::trim(fields[col[4]]));
        if (!SynsetRef::valid(syn)) {
            throw ParseError(source + ": malformed synset id '" + syn + "'", ln);
        }
        ev.synset = SynsetRef(syn);
        if (ev.run_id.empty() || ev.image_id.empty()) {
            throw ParseError(source + ": empty run_id or image_id", ln);
        }
        events.push_back(std::move(ev));
    }
    if (!have_header) {
        throw ParseError(source + ": missing header line", 1);
    }
    return events;
}

inline std::vector<StimulusEvent> load_events(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return parse_events(in, path.string());
}

inline void save_events(std::span<const StimulusEvent> events, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "run_id\tonset_volume\tn_volumes\timage_id\tsynset_id\n";
    for (const auto& ev : events) {
        out << ev.run_id << '\t' << ev.onset_volume << '\t' << ev.n_volumes << '\t' << ev.image_id << '\t'
            << ev.synset.str() << '\n';
    }
}

} // namespace semdec

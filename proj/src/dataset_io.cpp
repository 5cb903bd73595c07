#include "ae/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

namespace ae::io {

using nlohmann::json;

namespace {

struct PendingUtterance {
    std::string id;
    AddresseeClass label;
    std::string speaker_id;
    std::vector<Frame> frames;
    std::size_t header_line = 0;
};

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    fail(ErrorKind::Parse, "dataset line " + std::to_string(line) + ": " + what);
}

int face_side(std::size_t n) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
    return side * side == n ? static_cast<int>(side) : -1;
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<Utterance>& utterances) {
    for (const auto& u : utterances) {
        json header = {{"kind", "utterance_header"},
                       {"id", u.id()},
                       {"label", class_index(u.label())},
                       {"speaker_id", u.speaker_id()}};
        out << header.dump() << '\n';
        for (const auto& f : u.frames()) {
            const auto pose = f.pose.flat();
            json frame = {{"kind", "frame"},
                          {"utterance_id", f.utterance_id},
                          {"t_ms", f.t_ms},
                          {"face", f.face.pixels()},
                          {"pose", std::vector<double>(pose.begin(), pose.end())}};
            out << frame.dump() << '\n';
        }
    }
}

void write_dataset(const std::filesystem::path& path, const std::vector<Utterance>& utterances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write dataset " + path.string());
    write_dataset(out, utterances);
    out.flush();
    if (!out) fail(ErrorKind::Io, "failed writing dataset " + path.string());
}

std::vector<Utterance> read_dataset(std::istream& in) {
    std::vector<Utterance> out;
    std::optional<PendingUtterance> pending;
    int face_h = -1;

    auto close_pending = [&](std::size_t line) {
        if (!pending) return;
        if (pending->frames.empty()) parse_fail(pending->header_line, "utterance '" + pending->id + "' has no frames");
        try {
            out.emplace_back(pending->id, pending->label, pending->speaker_id, std::move(pending->frames));
        } catch (const Error& e) {
            parse_fail(line, e.what());
        }
        pending.reset();
    };

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.empty()) continue;
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::exception& e) {
            parse_fail(line, std::string("malformed JSON: ") + e.what());
        }
        try {
            const std::string kind = rec.at("kind").get<std::string>();
            if (kind == "utterance_header") {
                close_pending(line);
                const auto& label = rec.at("label");
                AddresseeClass cls = label.is_string() ? class_from_name(label.get<std::string>())
                                                       : class_from_index(label.get<int>());
                pending = PendingUtterance{rec.at("id").get<std::string>(), cls,
                                           rec.at("speaker_id").get<std::string>(), {}, line};
            } else if (kind == "frame") {
                if (!pending) parse_fail(line, "frame before any utterance_header");
                Frame f;
                f.utterance_id = rec.at("utterance_id").get<std::string>();
                if (f.utterance_id != pending->id) {
                    parse_fail(line, "frame for '" + f.utterance_id + "' inside utterance '" + pending->id + "'");
                }
                f.t_ms = rec.at("t_ms").get<std::int64_t>();
                auto face = rec.at("face").get<std::vector<double>>();
                const int side = face_side(face.size());
                if (side <= 0) parse_fail(line, "face is not a square pixel grid");
                if (face_h < 0) face_h = side;
                if (side != face_h) parse_fail(line, "face size differs from earlier frames");
                f.face = FaceCrop(side, side, std::move(face));
                f.pose = PoseKeypoints::from_flat(rec.at("pose").get<std::vector<double>>());
                pending->frames.push_back(std::move(f));
            } else {
                parse_fail(line, "unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            parse_fail(line, e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Parse) throw;
            parse_fail(line, e.what());
        }
    }
    close_pending(line);
    return out;
}

std::vector<Utterance> read_dataset(const std::filesystem::path& path) {
    const auto file = resolve_dataset_path(path);
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read dataset " + file.string());
    return read_dataset(in);
}

std::filesystem::path resolve_dataset_path(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return path / kDatasetFileName;
    return path;
}

}  // namespace ae::io

#include "etholabel/synthetic.hpp"

#include <algorithm>
#include <random>

#include "etholabel/segmenter.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

namespace fs = std::filesystem;

std::string stub_jpeg_bytes(const std::string& tag) {
    static const unsigned char header[] = {0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, 'J',  'F',
                                           'I',  'F',  0x00, 0x01, 0x01, 0x00, 0x00, 0x01,
                                           0x00, 0x01, 0x00, 0x00};
    std::string out(reinterpret_cast<const char*>(header), sizeof(header));
    std::string comment = tag.substr(0, 60000);
    std::uint16_t length = static_cast<std::uint16_t>(comment.size() + 2);
    out += '\xFF';
    out += '\xFE';
    out += static_cast<char>(length >> 8);
    out += static_cast<char>(length & 0xFF);
    out += comment;
    out += '\xFF';
    out += '\xD9';
    return out;
}

std::vector<BehaviorLabel> synthetic_gold(int seconds, std::uint64_t seed) {
    std::vector<BehaviorLabel> labels;
    labels.reserve(static_cast<size_t>(seconds));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < seconds; ++t) {
        double u = unit(rng);
        // Heavily imbalanced on purpose, mirroring real ethogram data.
        if (u < 0.80) {
            labels.push_back(BehaviorLabel::ExploringGrooming);
        } else if (u < 0.94) {
            labels.push_back(BehaviorLabel::Freezing);
        } else {
            labels.push_back(BehaviorLabel::Fleeing);
        }
    }
    // Guarantee nonzero support for every class so per-class F1 is meaningful.
    auto ensure = [&labels](BehaviorLabel cls, int position) {
        if (std::find(labels.begin(), labels.end(), cls) == labels.end() &&
            position < static_cast<int>(labels.size())) {
            labels[static_cast<size_t>(position)] = cls;
        }
    };
    ensure(BehaviorLabel::ExploringGrooming, 0);
    ensure(BehaviorLabel::Freezing, 1);
    ensure(BehaviorLabel::Fleeing, 2);
    return labels;
}

SessionInput make_synthetic_session(const fs::path& root, const SyntheticSpec& spec) {
    fs::path session_dir = root / spec.session_id;
    fs::remove_all(session_dir);

    SegmentManifest manifest;
    manifest.session_id = spec.session_id;
    manifest.fps_used = spec.fps;
    manifest.total_seconds = spec.seconds;
    for (int second = 0; second < spec.seconds; ++second) {
        SegmentRef segment;
        segment.session_id = spec.session_id;
        segment.second_index = second;
        for (int frame = 0; frame < spec.fps; ++frame) {
            fs::path path = session_dir / zero_pad(second, 6) / (zero_pad(frame, 2) + ".jpg");
            write_file_atomic(path, stub_jpeg_bytes(spec.session_id + "/" +
                                                    zero_pad(second, 6) + "/" +
                                                    zero_pad(frame, 2)));
            segment.frame_ids.push_back(path.string());
        }
        manifest.segments.push_back(std::move(segment));
    }
    save_manifest_json(manifest, session_dir);

    fs::path video_path = root / (spec.session_id + ".mp4");
    write_file_atomic(video_path, "stub video for session " + spec.session_id + "\n");

    SessionInput session;
    session.manifest = std::move(manifest);
    session.video_path = video_path.string();
    session.gold.session_id = spec.session_id;
    session.gold.labels = synthetic_gold(spec.seconds, spec.seed);
    return session;
}

}  // namespace etholabel

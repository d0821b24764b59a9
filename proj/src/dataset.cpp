#include "laneid/dataset.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace laneid {

std::size_t Corpus::frame_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames.size();
    return n;
}

Manifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        Manifest m;
        m.profile = j.at("profile").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.count = j.at("count").get<int>();
        m.frames = j.at("frames").get<int>();
        m.height = j.at("height").get<int>();
        m.width = j.at("width").get<int>();
        m.generator_version = j.at("generator_version").get<int>();
        m.sequences = j.at("sequences").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    corpus.manifest = read_manifest(dir);
    for (const auto& id : corpus.manifest.sequences) {
        Sequence seq;
        seq.id = id;
        const auto seq_dir = dir / id;
        const auto label_path = seq_dir / "labels.jsonl";
        std::ifstream labels(label_path);
        if (!labels) throw DatasetError("cannot open " + label_path.string());
        std::string line;
        int expected_frame = 0;
        while (std::getline(labels, line)) {
            if (line.empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                if (j.at("frame").get<int>() != expected_frame) {
                    throw DatasetError(label_path.string() + ": frames out of order at " + std::to_string(expected_frame));
                }
                LaneLabel l{j.at("delta_l").get<int>(), j.at("delta_r").get<int>(), j.at("lane_count").get<int>()};
                l.validate();
                seq.labels.push_back(l);
            } catch (const nlohmann::json::exception& e) {
                throw DatasetError(label_path.string() + ": " + e.what());
            } catch (const LabelError& e) {
                throw DatasetError(label_path.string() + ": " + e.what());
            }
            char name[32];
            std::snprintf(name, sizeof name, "frame_%05d.ppm", expected_frame);
            try {
                Image img = read_ppm(seq_dir / name);
                if (img.width() != corpus.manifest.width || img.height() != corpus.manifest.height) {
                    throw DatasetError((seq_dir / name).string() + ": image size differs from manifest");
                }
                seq.frames.push_back(std::move(img));
            } catch (const ImageIoError& e) {
                throw DatasetError(e.what());
            }
            ++expected_frame;
        }
        if (seq.frames.empty()) throw DatasetError(label_path.string() + ": no frames");
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

} // namespace laneid

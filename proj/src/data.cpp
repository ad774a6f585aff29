#include "narex/data.hpp"

#include <fstream>

namespace narex {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    NAREX_CHECK(in.good(), "cannot open ", path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<FinetunePair> load_parallel(const std::string& src_path,
                                        const std::string& tgt_path,
                                        const Vocabulary& vocab) {
    const std::vector<std::string> src_lines = read_lines(src_path);
    const std::vector<std::string> tgt_lines = read_lines(tgt_path);
    NAREX_CHECK(src_lines.size() == tgt_lines.size(), "line counts differ: ",
                src_path, " has ", src_lines.size(), ", ", tgt_path, " has ",
                tgt_lines.size());

    std::vector<FinetunePair> pairs;
    pairs.reserve(src_lines.size());
    for (std::size_t i = 0; i < src_lines.size(); ++i) {
        FinetunePair pair;
        pair.src_ids = encode(src_lines[i], vocab);
        pair.tgt_ids = encode(tgt_lines[i], vocab);
        NAREX_CHECK(!pair.src_ids.empty(), "blank source on line ", i + 1,
                    " of ", src_path);
        NAREX_CHECK(!pair.tgt_ids.empty(), "blank target on line ", i + 1,
                    " of ", tgt_path);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace narex

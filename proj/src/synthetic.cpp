#include "narex/synthetic.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "narex/rng.hpp"

namespace narex {

namespace {

constexpr std::array<const char*, 20> kNames{
    "mara",  "jonas",  "petra", "felix", "nadia", "oscar", "lena",
    "viktor", "sonia", "ruben", "alma",  "teodor", "greta", "milan",
    "ida",   "bruno",  "vera",  "casper", "noor",  "elias"};

constexpr std::array<const char*, 8> kColors{"red",   "blue",  "green",
                                             "yellow", "black", "white",
                                             "copper", "silver"};

constexpr std::array<const char*, 15> kObjects{
    "crates",  "lanterns", "ropes",   "maps",    "bottles",
    "books",   "tools",    "jars",    "blankets", "candles",
    "barrels", "baskets",  "kettles", "frames",  "chairs"};

constexpr std::array<const char*, 9> kCounts{"two", "three", "four", "five",
                                             "six", "seven", "eight", "nine",
                                             "ten"};

constexpr std::array<const char*, 3> kPlaces{"shed", "attic", "cellar"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(N) - 1))];
}

std::string random_words(Rng& rng) {
    // Flat lexicon shared by the copy and reverse tasks.
    const int len = static_cast<int>(rng.uniform_int(5, 24));
    std::ostringstream out;
    for (int i = 0; i < len; ++i) {
        if (i > 0) out << ' ';
        switch (rng.uniform_int(0, 4)) {
            case 0: out << pick(kNames, rng); break;
            case 1: out << pick(kColors, rng); break;
            case 2: out << pick(kObjects, rng); break;
            case 3: out << pick(kCounts, rng); break;
            default: out << pick(kPlaces, rng); break;
        }
    }
    return out.str();
}

std::string reverse_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    std::ostringstream out;
    for (std::size_t i = words.size(); i > 0; --i) {
        if (i != words.size()) out << ' ';
        out << words[i - 1];
    }
    return out.str();
}

SyntheticPair template_pair(Rng& rng) {
    const std::string name = pick(kNames, rng);
    const std::string count = pick(kCounts, rng);
    const std::string color = pick(kColors, rng);
    const std::string object = pick(kObjects, rng);
    const std::string place = pick(kPlaces, rng);

    SyntheticPair pair;
    pair.src = name + " keeps " + count + " " + color + " " + object +
               " in the " + place + " .";
    if (place == "shed") {
        pair.tgt =
            name + " piles " + count + " " + object + " inside the shed .";
    } else if (place == "attic") {
        pair.tgt = "up in the attic , " + name + " hides " + count + " " +
                   color + " " + object + " .";
    } else {
        pair.tgt = "the cellar down below holds " + count + " " + color + " " +
                   object + " that " + name + " wants to keep safe .";
    }
    return pair;
}

}  // namespace

SyntheticTask parse_synthetic_task(const std::string& name) {
    if (name == "copy") return SyntheticTask::Copy;
    if (name == "reverse") return SyntheticTask::Reverse;
    if (name == "template") return SyntheticTask::Template;
    fail("unknown synthetic task ", name, "; expected copy, reverse or template");
}

std::vector<SyntheticPair> make_synthetic(SyntheticTask task, int size,
                                          std::uint64_t seed) {
    NAREX_CHECK(size >= 1, "synthetic dataset size must be at least 1, got ",
                size);
    Rng rng(seed);
    std::vector<SyntheticPair> pairs;
    pairs.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        switch (task) {
            case SyntheticTask::Copy: {
                SyntheticPair p;
                p.src = random_words(rng);
                p.tgt = p.src;
                pairs.push_back(std::move(p));
                break;
            }
            case SyntheticTask::Reverse: {
                SyntheticPair p;
                p.src = random_words(rng);
                p.tgt = reverse_words(p.src);
                pairs.push_back(std::move(p));
                break;
            }
            case SyntheticTask::Template:
                pairs.push_back(template_pair(rng));
                break;
        }
    }
    return pairs;
}

void write_parallel(const std::vector<SyntheticPair>& pairs,
                    const std::string& src_path, const std::string& tgt_path) {
    std::ofstream src(src_path), tgt(tgt_path);
    NAREX_CHECK(src.good(), "cannot open ", src_path, " for writing");
    NAREX_CHECK(tgt.good(), "cannot open ", tgt_path, " for writing");
    for (const SyntheticPair& pair : pairs) {
        src << pair.src << '\n';
        tgt << pair.tgt << '\n';
    }
    NAREX_CHECK(src.good() && tgt.good(), "failed writing parallel files");
}

}  // namespace narex

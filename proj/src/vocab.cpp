#include "spellm/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "spellm/numcore.hpp"
#include "spellm/sha256.hpp"

namespace spellm {
namespace {

using nlohmann::json;

constexpr uint32_t kReplacement = 0xFFFD;
constexpr uint32_t kPadSentinel = 0xFFFFFFFE;  // never a codepoint

struct FoldEntry {
    uint32_t cp;
    char base;
};

#include "latin_fold_table.inc"

std::optional<char> fold_latin(uint32_t cp) {
    const FoldEntry* begin = kLatinFold;
    const FoldEntry* end = kLatinFold + std::size(kLatinFold);
    auto it = std::lower_bound(begin, end, cp,
                               [](const FoldEntry& e, uint32_t c) { return e.cp < c; });
    if (it != end && it->cp == cp) return it->base;
    return std::nullopt;
}

bool is_combining_mark(uint32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

std::vector<uint32_t> decode_utf8(const std::string& s) {
    std::vector<uint32_t> out;
    size_t i = 0, n = s.size();
    while (i < n) {
        uint8_t b0 = uint8_t(s[i]);
        uint32_t cp = kReplacement;
        size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < n && (uint8_t(s[i + 1]) >> 6) == 0x2) {
            cp = (uint32_t(b0 & 0x1F) << 6) | (uint8_t(s[i + 1]) & 0x3F);
            len = 2;
        } else if ((b0 >> 4) == 0xE && i + 2 < n && (uint8_t(s[i + 1]) >> 6) == 0x2 &&
                   (uint8_t(s[i + 2]) >> 6) == 0x2) {
            cp = (uint32_t(b0 & 0x0F) << 12) | (uint32_t(uint8_t(s[i + 1]) & 0x3F) << 6) |
                 (uint8_t(s[i + 2]) & 0x3F);
            len = 3;
        } else if ((b0 >> 3) == 0x1E && i + 3 < n && (uint8_t(s[i + 1]) >> 6) == 0x2 &&
                   (uint8_t(s[i + 2]) >> 6) == 0x2 && (uint8_t(s[i + 3]) >> 6) == 0x2) {
            cp = (uint32_t(b0 & 0x07) << 18) | (uint32_t(uint8_t(s[i + 1]) & 0x3F) << 12) |
                 (uint32_t(uint8_t(s[i + 2]) & 0x3F) << 6) | (uint8_t(s[i + 3]) & 0x3F);
            len = 4;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(char(cp));
    } else if (cp < 0x800) {
        out.push_back(char(0xC0 | (cp >> 6)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(char(0xE0 | (cp >> 12)));
        out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(char(0xF0 | (cp >> 18)));
        out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    }
}

// One normalized codepoint: fold diacritics, map out-of-alphabet to U+FFFD.
std::optional<uint32_t> normalize_cp(uint32_t cp, const CharVocab& cv) {
    if (is_combining_mark(cp)) return std::nullopt;
    uint32_t base = cp;
    if (auto folded = fold_latin(cp)) base = uint32_t(uint8_t(*folded));
    if (cv.index_of(base).has_value()) return base;
    return kReplacement;
}

}  // namespace

CharVocab CharVocab::default_latin() {
    std::vector<uint32_t> cps;
    cps.push_back(' ');
    const char* punct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    for (const char* p = punct; *p; ++p) cps.push_back(uint32_t(uint8_t(*p)));
    for (char c = '0'; c <= '9'; ++c) cps.push_back(uint32_t(c));
    for (char c = 'a'; c <= 'z'; ++c) cps.push_back(uint32_t(c));
    for (char c = 'A'; c <= 'Z'; ++c) cps.push_back(uint32_t(c));
    std::vector<uint32_t> with_reserved;
    with_reserved.push_back(kPadSentinel);
    with_reserved.push_back(kReplacement);
    with_reserved.insert(with_reserved.end(), cps.begin(), cps.end());
    return from_codepoints(with_reserved);
}

CharVocab CharVocab::from_codepoints(const std::vector<uint32_t>& codepoints) {
    if (codepoints.size() < 2) throw ContractError("CharVocab: needs PAD and UNK");
    CharVocab cv;
    cv.codepoints_ = codepoints;
    cv.codepoints_[kPadIndex] = kPadSentinel;
    cv.codepoints_[kUnkIndex] = kReplacement;
    for (int i = 0; i < int(cv.codepoints_.size()); ++i) {
        if (i == kPadIndex) continue;
        auto [it, fresh] = cv.index_.emplace(cv.codepoints_[i], i);
        if (!fresh) throw ContractError("CharVocab: duplicate symbol at index " + std::to_string(i));
    }
    return cv;
}

CharVocab CharVocab::from_serialized(const std::vector<std::string>& charset) {
    if (charset.size() < 2 || charset[0] != "<pad>" || charset[1] != "<unk>")
        throw ContractError("CharVocab: charset must begin with <pad>, <unk>");
    std::vector<uint32_t> cps;
    cps.push_back(kPadSentinel);
    cps.push_back(kReplacement);
    for (size_t i = 2; i < charset.size(); ++i) {
        std::vector<uint32_t> decoded = decode_utf8(charset[i]);
        if (decoded.size() != 1)
            throw ContractError("CharVocab: charset entry " + std::to_string(i) +
                                " is not a single character");
        cps.push_back(decoded[0]);
    }
    return from_codepoints(cps);
}

std::optional<int> CharVocab::index_of(uint32_t cp) const {
    auto it = index_.find(cp);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

uint32_t CharVocab::codepoint_at(int index) const {
    if (index < 0 || index >= size()) throw ContractError("CharVocab: index out of range");
    if (index == kPadIndex) throw ContractError("CharVocab: PAD has no codepoint");
    return codepoints_[index];
}

std::vector<std::string> CharVocab::serialized() const {
    std::vector<std::string> out;
    out.reserve(codepoints_.size());
    out.push_back("<pad>");
    out.push_back("<unk>");
    for (size_t i = 2; i < codepoints_.size(); ++i) {
        std::string s;
        encode_utf8(codepoints_[i], s);
        out.push_back(std::move(s));
    }
    return out;
}

std::string normalize(const std::string& raw, const CharVocab& cv) {
    std::string out;
    out.reserve(raw.size());
    for (uint32_t cp : decode_utf8(raw))
        if (auto norm = normalize_cp(cp, cv)) encode_utf8(*norm, out);
    return out;
}

SpelledString spell(const std::string& raw, int k, const CharVocab& cv) {
    if (k < 1) throw ContractError("spell: k must be >= 1");
    SpelledString s(size_t(k), kPadIndex);
    int pos = 0;
    for (uint32_t cp : decode_utf8(raw)) {
        if (pos >= k) break;
        auto norm = normalize_cp(cp, cv);
        if (!norm) continue;  // combining mark
        s[pos++] = *cv.index_of(*norm);
    }
    return s;
}

std::string unspell(const SpelledString& s, const CharVocab& cv) {
    std::string out;
    for (int idx : s) {
        if (idx == kPadIndex) break;
        encode_utf8(cv.codepoint_at(idx), out);
    }
    return out;
}

namespace {

std::string spelling_key(const SpelledString& s) {
    std::string key;
    key.reserve(s.size() * 2);
    for (int idx : s) {
        key.push_back(char(idx & 0xFF));
        key.push_back(char((idx >> 8) & 0xFF));
    }
    return key;
}

int count_codepoints(const std::string& s) {
    int n = 0;
    for (char c : s)
        if ((uint8_t(c) & 0xC0) != 0x80) ++n;
    return n;
}

}  // namespace

TokenVocab::TokenVocab(std::vector<std::string> raws, int k, CharVocab cv)
    : k_(k), cv_(std::move(cv)) {
    if (k < 1) throw ContractError("TokenVocab: k must be >= 1");
    entries_.reserve(raws.size());
    std::string hash_input = "spellm-vocab-v1\nk=" + std::to_string(k) + "\ncharset=";
    for (const std::string& sym : cv_.serialized()) {
        hash_input += sym;
        hash_input += '\x1f';
    }
    hash_input += '\n';
    for (int id = 0; id < int(raws.size()); ++id) {
        TokenEntry e;
        e.id = id;
        e.raw = std::move(raws[id]);
        e.spelling = spell(e.raw, k_, cv_);
        e.norm_len = count_codepoints(normalize(e.raw, cv_));
        hash_input += std::to_string(id) + ":" + std::to_string(e.raw.size()) + ":" + e.raw;
        by_spelling_[spelling_key(e.spelling)].push_back(id);
        entries_.push_back(std::move(e));
    }
    hash_ = sha256_hex(hash_input);
}

const std::vector<int>& TokenVocab::ids_for_spelling(const SpelledString& s) const {
    static const std::vector<int> kEmpty;
    auto it = by_spelling_.find(spelling_key(s));
    return it == by_spelling_.end() ? kEmpty : it->second;
}

std::pair<bool, std::vector<int>> is_valid_token(const SpelledString& s, const TokenVocab& tv) {
    if (int(s.size()) != tv.k()) throw ContractError("is_valid_token: spelling length != k");
    const std::vector<int>& ids = tv.ids_for_spelling(s);
    return {!ids.empty(), ids};
}

CoverageReport coverage_report(const TokenVocab& tv, const CharVocab& cv) {
    CoverageReport rep;
    rep.total = tv.S();
    if (rep.total == 0) return rep;
    int representable = 0, truncated = 0, with_unk = 0;
    for (const TokenEntry& e : tv.entries()) {
        std::string norm = normalize(e.raw, cv);
        std::vector<uint32_t> cps = decode_utf8(norm);
        bool unk = std::find(cps.begin(), cps.end(), uint32_t(0xFFFD)) != cps.end();
        bool over = int(cps.size()) > tv.k();
        if (unk) ++with_unk;
        if (over) ++truncated;
        if (!unk && !over) ++representable;
    }
    rep.representable = double(representable) / rep.total;
    rep.truncated = double(truncated) / rep.total;
    rep.contains_unk = double(with_unk) / rep.total;
    return rep;
}

void write_vocab_file(const std::string& path, const TokenVocab& tv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    json header = {{"format", "spellm-vocab-v1"}, {"k", tv.k()}, {"charset", tv.charset().serialized()}};
    out << header.dump() << "\n";
    for (const TokenEntry& e : tv.entries()) {
        json line = {{"id", e.id}, {"raw", e.raw}};
        out << line.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

TokenVocab read_vocab_file(const std::string& path, std::optional<int> k_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocab file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw TruncatedFileError("vocab file has no header: " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("vocab header: ") + e.what(), 1);
    }
    if (header.value("format", "") != "spellm-vocab-v1")
        throw FormatVersionError("vocab file format is not spellm-vocab-v1: " + path);
    CharVocab cv = CharVocab::from_serialized(header.at("charset").get<std::vector<std::string>>());
    int k = k_override.value_or(header.at("k").get<int>());

    std::vector<std::pair<int, std::string>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            rows.emplace_back(rec.at("id").get<int>(), rec.at("raw").get<std::string>());
        } catch (const json::exception& e) {
            throw ParseError(std::string("vocab entry: ") + e.what(), line_no);
        }
    }
    std::vector<std::string> raws(rows.size());
    std::vector<bool> seen(rows.size(), false);
    for (auto& [id, raw] : rows) {
        if (id < 0 || id >= int(rows.size()) || seen[id])
            throw ParseError("token ids must cover 0..S-1 exactly once (bad id " +
                             std::to_string(id) + ")", line_no);
        seen[id] = true;
        raws[id] = std::move(raw);
    }
    return TokenVocab(std::move(raws), k, std::move(cv));
}

std::vector<std::string> synth_token_raws(int S, uint64_t seed, int min_len, int max_len) {
    if (S < 1 || min_len < 1 || max_len < min_len)
        throw ContractError("synth_token_raws: bad shape parameters");
    // Length weights peak at 3-4 characters; the tail past 6 stays small so a
    // k=6 student can fully spell almost every token.
    static const double kLenWeight[] = {4.0, 19.0, 27.0, 25.0, 13.0, 7.0,
                                        1.4, 0.8, 0.4, 0.25, 0.15, 0.1};
    const int kWeights = int(std::size(kLenWeight));
    SeededRng rng = SeededRng(seed).child(0x766f6361625f31ULL);
    std::vector<double> cum;
    double total = 0.0;
    for (int len = min_len; len <= max_len; ++len) {
        total += kLenWeight[std::min(len - 1, kWeights - 1)];
        cum.push_back(total);
    }
    auto draw_len = [&]() {
        double u = rng.next_double() * total;
        for (size_t i = 0; i < cum.size(); ++i)
            if (u < cum[i]) return min_len + int(i);
        return max_len;
    };
    std::vector<std::string> out;
    std::unordered_map<std::string, bool> used;
    out.reserve(S);
    while (int(out.size()) < S) {
        int len = draw_len();
        std::string w;
        for (int attempt = 0;; ++attempt) {
            w.clear();
            for (int i = 0; i < len; ++i) {
                if (i == 0) {
                    bool upper = rng.next_double() < 0.10;
                    w.push_back(char((upper ? 'A' : 'a') + rng.next_int(26)));
                } else {
                    double u = rng.next_double();
                    if (u < 0.993 || len < 3)
                        w.push_back(char('a' + rng.next_int(26)));
                    else if (u < 0.997)
                        w.push_back(char('0' + rng.next_int(10)));
                    else
                        w.push_back('\'');
                }
            }
            if (!used.count(w)) break;
            if (attempt > 0 && attempt % 64 == 0 && len < max_len) ++len;
        }
        used[w] = true;
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace spellm

#include "etholabel/labelparser.hpp"

#include <algorithm>
#include <array>

#include "etholabel/util.hpp"

namespace etholabel {

namespace {

struct TokenEntry {
    std::string_view folded;
    BehaviorLabel label;
    bool canonical;  // exact canonical spelling modulo case/whitespace
};

// Longest tokens first so the scanner prefers "exploring/grooming" over its
// halves.
constexpr std::array<TokenEntry, 7> kTokenTable = {{
    {"exploring/grooming", BehaviorLabel::ExploringGrooming, true},
    {"grooming/exploring", BehaviorLabel::ExploringGrooming, false},
    {"exploring", BehaviorLabel::ExploringGrooming, false},
    {"grooming", BehaviorLabel::ExploringGrooming, false},
    {"freezing", BehaviorLabel::Freezing, true},
    {"fleeing", BehaviorLabel::Fleeing, true},
    {"unknown", BehaviorLabel::Unknown, true},
}};

const TokenEntry* lookup_folded(std::string_view folded) {
    for (const TokenEntry& e : kTokenTable) {
        if (e.folded == folded) return &e;
    }
    return nullptr;
}

struct RawToken {
    std::string text;    // original spelling, trimmed
    BehaviorLabel label;
    bool synonym;        // mapped through a non-canonical synonym
};

void append_bracket_tokens(std::string_view inner, std::vector<RawToken>& out) {
    size_t start = 0;
    while (start <= inner.size()) {
        size_t comma = inner.find(',', start);
        std::string_view piece =
            comma == std::string_view::npos ? inner.substr(start) : inner.substr(start, comma - start);
        std::string folded = fold_token(piece);
        if (!folded.empty()) {
            RawToken tok;
            // trim for the repair log
            size_t b = piece.find_first_not_of(" \t\r\n");
            size_t e = piece.find_last_not_of(" \t\r\n");
            tok.text = (b == std::string_view::npos) ? std::string(piece)
                                                     : std::string(piece.substr(b, e - b + 1));
            if (const TokenEntry* entry = lookup_folded(folded)) {
                tok.label = entry->label;
                tok.synonym = !entry->canonical;
            } else {
                tok.label = BehaviorLabel::Unknown;
                tok.synonym = false;
            }
            out.push_back(std::move(tok));
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
}

// Finds the last complete [...] region; npos pair when none exists.
std::pair<size_t, size_t> last_bracket_region(std::string_view text) {
    size_t best_open = std::string_view::npos;
    size_t best_close = std::string_view::npos;
    size_t pos = 0;
    while (true) {
        size_t open = text.find('[', pos);
        if (open == std::string_view::npos) break;
        size_t close = text.find(']', open + 1);
        if (close == std::string_view::npos) break;
        best_open = open;
        best_close = close;
        pos = close + 1;
    }
    return {best_open, best_close};
}

// Free-text fallback: scan the lowercased text for known tokens in order of
// appearance, longest match first at each position.
void scan_free_text(std::string_view text, std::vector<RawToken>& out) {
    std::string lower = to_lower(std::string(text));
    size_t i = 0;
    while (i < lower.size()) {
        bool matched = false;
        for (const TokenEntry& e : kTokenTable) {
            if (lower.compare(i, e.folded.size(), e.folded) == 0) {
                RawToken tok;
                tok.text = std::string(text.substr(i, e.folded.size()));
                tok.label = e.label;
                tok.synonym = !e.canonical;
                out.push_back(std::move(tok));
                i += e.folded.size();
                matched = true;
                break;
            }
        }
        if (!matched) ++i;
    }
}

}  // namespace

BehaviorLabel normalize_label(std::string_view token) {
    std::string folded = fold_token(token);
    if (const TokenEntry* entry = lookup_folded(folded)) return entry->label;
    return BehaviorLabel::Unknown;
}

ParseOutcome parse_label_vector(std::string_view raw_text, int n) {
    ParseOutcome outcome;
    if (n < 1) n = 1;

    std::vector<RawToken> tokens;
    auto [open, close] = last_bracket_region(raw_text);
    if (open != std::string_view::npos) {
        append_bracket_tokens(raw_text.substr(open + 1, close - open - 1), tokens);
    } else {
        scan_free_text(raw_text, tokens);
    }

    for (const RawToken& tok : tokens) {
        if (tok.synonym) {
            outcome.repairs.push_back({RepairKind::SynonymMapped, 0, tok.text});
        }
    }

    if (static_cast<int>(tokens.size()) > n) {
        int extra = static_cast<int>(tokens.size()) - n;
        // Extras were never part of the answer; drop their synonym records too.
        outcome.repairs.clear();
        for (int i = 0; i < n; ++i) {
            if (tokens[i].synonym) {
                outcome.repairs.push_back({RepairKind::SynonymMapped, 0, tokens[i].text});
            }
        }
        tokens.resize(static_cast<size_t>(n));
        outcome.repairs.push_back({RepairKind::Truncated, extra, ""});
    }

    for (const RawToken& tok : tokens) outcome.labels.push_back(tok.label);

    if (static_cast<int>(outcome.labels.size()) < n) {
        int missing = n - static_cast<int>(outcome.labels.size());
        outcome.labels.insert(outcome.labels.end(), static_cast<size_t>(missing),
                              BehaviorLabel::Unknown);
        outcome.repairs.push_back({RepairKind::PaddedUnknown, missing, ""});
    }

    outcome.clean = outcome.repairs.empty();
    return outcome;
}

std::string canonical_label_vector(const std::vector<BehaviorLabel>& labels) {
    std::string out = "[";
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += ", ";
        out += to_string(labels[i]);
    }
    out += "]";
    return out;
}

}  // namespace etholabel

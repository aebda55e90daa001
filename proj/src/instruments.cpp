#include "persona/instruments.hpp"

#include "persona/errors.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;

namespace {

constexpr std::string_view kBankSchema = "persona-bank/1";

constexpr std::size_t kMbtiItems = 60;
constexpr std::size_t kBfiItems = 44;
constexpr std::size_t kMinItemsPerAxis = 10;

const std::array<int, 7> kMbtiValues{3, 2, 1, 0, -1, -2, -3};
const std::array<int, 5> kBfiValues{1, 2, 3, 4, 5};
const std::array<std::size_t, 5> kBfiFactorCounts{8, 9, 9, 8, 10};
const std::set<int> kBfiReversed{2, 6, 8, 9, 12, 18, 21, 23, 24, 27, 31, 34, 35, 37, 41, 43};

void require_only(const json& obj, std::initializer_list<std::string_view> allowed,
                  std::string_view where) {
    if (!obj.is_object()) throw SchemaError(fmt::format("{}: expected an object", where));
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw SchemaError(fmt::format("{}: unknown field '{}'", where, it.key()));
        }
    }
}

template <typename T>
T field(const json& obj, const char* name, std::string_view where) {
    auto it = obj.find(name);
    if (it == obj.end()) throw SchemaError(fmt::format("{}: missing field '{}'", where, name));
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SchemaError(fmt::format("{}: field '{}' has the wrong type", where, name));
    }
}

OptionScale parse_scale(const json& arr, Instrument instrument) {
    if (!arr.is_array()) throw SchemaError("scale: expected an array");
    OptionScale scale;
    scale.instrument = instrument;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto where = fmt::format("scale[{}]", i);
        require_only(arr[i], {"label", "value"}, where);
        scale.labels.push_back(field<std::string>(arr[i], "label", where));
        scale.values.push_back(field<int>(arr[i], "value", where));
    }

    const bool mbti = instrument == Instrument::MBTI;
    const std::vector<int> expected = mbti ? std::vector<int>(kMbtiValues.begin(), kMbtiValues.end())
                                           : std::vector<int>(kBfiValues.begin(), kBfiValues.end());
    if (scale.values != expected) {
        throw KeyError(fmt::format("{} scale must have {} options with values [{}]",
                                   to_string(instrument), expected.size(),
                                   fmt::join(expected, ", ")));
    }
    std::set<std::string> seen;
    for (const auto& l : scale.labels) {
        if (l.empty()) throw KeyError("scale labels must be non-empty");
        if (!seen.insert(casefold(l)).second) {
            throw KeyError(fmt::format("duplicate scale label '{}'", l));
        }
    }
    return scale;
}

}  // namespace

std::string_view to_string(Instrument i) noexcept { return i == Instrument::MBTI ? "MBTI" : "BFI"; }

Instrument parse_instrument(std::string_view s) {
    const auto f = casefold(s);
    if (f == "mbti") return Instrument::MBTI;
    if (f == "bfi") return Instrument::BFI;
    throw SchemaError(fmt::format("unknown instrument '{}'", s));
}

std::string_view to_string(Axis a) noexcept {
    switch (a) {
        case Axis::EI: return "EI";
        case Axis::SN: return "SN";
        case Axis::TF: return "TF";
        case Axis::JP: return "JP";
    }
    return "EI";
}

Axis parse_axis(std::string_view s) {
    for (Axis a : kAxes) {
        if (to_string(a) == s) return a;
    }
    throw SchemaError(fmt::format("unknown axis '{}'", s));
}

char first_pole(Axis a) noexcept { return "ESTJ"[static_cast<int>(a)]; }
char second_pole(Axis a) noexcept { return "INFP"[static_cast<int>(a)]; }

std::string_view to_string(Factor f) noexcept {
    switch (f) {
        case Factor::Extraversion: return "Extraversion";
        case Factor::Agreeableness: return "Agreeableness";
        case Factor::Conscientiousness: return "Conscientiousness";
        case Factor::Neuroticism: return "Neuroticism";
        case Factor::Openness: return "Openness";
    }
    return "Extraversion";
}

char factor_letter(Factor f) noexcept { return "EACNO"[static_cast<int>(f)]; }

Factor parse_factor(std::string_view s) {
    const auto folded = casefold(s);
    for (Factor f : kFactors) {
        if (folded == casefold(to_string(f))) return f;
        if (folded.size() == 1 && folded[0] == ascii_lower(factor_letter(f))) return f;
    }
    throw SchemaError(fmt::format("unknown BFI factor '{}'", s));
}

std::size_t OptionScale::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return i;
    }
    const auto folded = casefold(label);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (casefold(labels[i]) == folded) return i;
    }
    throw UnknownLabel(fmt::format("'{}' is not an option of the {} scale", label,
                                   to_string(instrument)));
}

std::string_view OptionScale::label_for(int value) const {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] == value) return labels[i];
    }
    throw UnknownLabel(fmt::format("no {} option has value {}", to_string(instrument), value));
}

int option_value(const OptionScale& scale, std::string_view label) {
    return scale.values[scale.index_of(label)];
}

std::vector<int> BfiKey::items_of(Factor f) const {
    std::vector<int> ids;
    for (const auto& [id, factor] : item_factor) {
        if (factor == f) ids.push_back(id);
    }
    return ids;
}

const Question& QuestionBank::question(int id) const {
    if (id < 1 || static_cast<std::size_t>(id) > questions.size()) {
        throw KeyError(fmt::format("{} has no question {}", to_string(instrument), id));
    }
    return questions[static_cast<std::size_t>(id - 1)];
}

const MbtiKey& QuestionBank::mbti_key() const {
    if (auto* k = std::get_if<MbtiKey>(&key)) return *k;
    throw KeyError("bank does not carry an MBTI key");
}

const BfiKey& QuestionBank::bfi_key() const {
    if (auto* k = std::get_if<BfiKey>(&key)) return *k;
    throw KeyError("bank does not carry a BFI key");
}

QuestionBank parse_bank(const json& doc, Instrument expected) {
    require_only(doc, {"schema", "instrument", "note", "scale", "items"}, "bank");
    if (field<std::string>(doc, "schema", "bank") != kBankSchema) {
        throw SchemaError(fmt::format("bank: schema must be '{}'", kBankSchema));
    }
    const auto instrument = parse_instrument(field<std::string>(doc, "instrument", "bank"));
    if (instrument != expected) {
        throw SchemaError(fmt::format("bank is for {} but {} was requested", to_string(instrument),
                                      to_string(expected)));
    }

    QuestionBank bank;
    bank.instrument = instrument;
    if (doc.contains("note")) bank.note = field<std::string>(doc, "note", "bank");
    if (!doc.contains("scale")) throw SchemaError("bank: missing field 'scale'");
    bank.scale = parse_scale(doc.at("scale"), instrument);

    if (!doc.contains("items")) throw SchemaError("bank: missing field 'items'");
    const auto& items = doc.at("items");
    if (!items.is_array()) throw SchemaError("bank: 'items' must be an array");

    const bool mbti = instrument == Instrument::MBTI;
    MbtiKey mkey;
    BfiKey bkey;
    std::map<int, Question> by_id;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto where = fmt::format("items[{}]", i);
        const auto& it = items[i];
        if (mbti) {
            require_only(it, {"id", "text", "axis", "polarity", "rationale"}, where);
        } else {
            require_only(it, {"id", "text", "factor", "reversed"}, where);
        }
        Question q{field<int>(it, "id", where), field<std::string>(it, "text", where), instrument};
        if (q.text.empty()) throw SchemaError(where + ": empty question text");
        if (by_id.count(q.id)) throw KeyError(fmt::format("duplicate question id {}", q.id));
        if (mbti) {
            mkey.item_axis[q.id] = parse_axis(field<std::string>(it, "axis", where));
            const int pol = field<int>(it, "polarity", where);
            if (pol != 1 && pol != -1) throw KeyError(where + ": polarity must be +1 or -1");
            mkey.polarity[q.id] = pol;
            if (it.contains("rationale")) mkey.rationale[q.id] = field<std::string>(it, "rationale", where);
        } else {
            bkey.item_factor[q.id] = parse_factor(field<std::string>(it, "factor", where));
            if (field<bool>(it, "reversed", where)) bkey.reversed.insert(q.id);
        }
        by_id.emplace(q.id, std::move(q));
    }

    const std::size_t want = mbti ? kMbtiItems : kBfiItems;
    if (by_id.size() != want) {
        throw KeyError(fmt::format("{} bank must have {} questions, found {}", to_string(instrument),
                                   want, by_id.size()));
    }
    int expect_id = 1;
    for (auto& [id, q] : by_id) {
        if (id != expect_id++) throw KeyError("question ids must be contiguous from 1");
        bank.questions.push_back(std::move(q));
    }

    if (mbti) {
        for (Axis a : kAxes) {
            const auto n = static_cast<std::size_t>(std::count_if(
                mkey.item_axis.begin(), mkey.item_axis.end(),
                [a](const auto& kv) { return kv.second == a; }));
            if (n < kMinItemsPerAxis) {
                throw KeyError(fmt::format("axis {} has only {} items (minimum {})", to_string(a), n,
                                           kMinItemsPerAxis));
            }
        }
        bank.key = std::move(mkey);
    } else {
        for (Factor f : kFactors) {
            const auto n = bkey.items_of(f).size();
            const auto want_n = kBfiFactorCounts[static_cast<std::size_t>(f)];
            if (n != want_n) {
                throw KeyError(fmt::format("factor {} has {} items, expected {}", to_string(f), n, want_n));
            }
        }
        if (bkey.reversed != kBfiReversed) throw KeyError("BFI reversed-item set does not match the standard key");
        bank.key = std::move(bkey);
    }
    return bank;
}

QuestionBank load_bank(const std::filesystem::path& path, Instrument expected) {
    std::ifstream in(path);
    if (!in) throw SchemaError(fmt::format("cannot open bank file '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_bank(doc, expected);
}

BankSet load_banks(const std::filesystem::path& data_dir) {
    return BankSet{load_bank(data_dir / "mbti_bank.json", Instrument::MBTI),
                   load_bank(data_dir / "bfi_bank.json", Instrument::BFI)};
}

std::string serialize_bank(const QuestionBank& bank) {
    nlohmann::ordered_json doc;
    doc["schema"] = kBankSchema;
    doc["instrument"] = to_string(bank.instrument);
    if (!bank.note.empty()) doc["note"] = bank.note;
    auto scale = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < bank.scale.size(); ++i) {
        scale.push_back({{"label", bank.scale.labels[i]}, {"value", bank.scale.values[i]}});
    }
    doc["scale"] = std::move(scale);
    auto items = nlohmann::ordered_json::array();
    for (const auto& q : bank.questions) {
        nlohmann::ordered_json item;
        item["id"] = q.id;
        item["text"] = q.text;
        if (const auto* k = std::get_if<MbtiKey>(&bank.key)) {
            item["axis"] = to_string(k->item_axis.at(q.id));
            item["polarity"] = k->polarity.at(q.id);
            if (auto r = k->rationale.find(q.id); r != k->rationale.end()) item["rationale"] = r->second;
        } else {
            const auto& b = std::get<BfiKey>(bank.key);
            item["factor"] = std::string(1, factor_letter(b.item_factor.at(q.id)));
            item["reversed"] = b.reversed.count(q.id) > 0;
        }
        items.push_back(std::move(item));
    }
    doc["items"] = std::move(items);
    return doc.dump(2, ' ', false) + "\n";
}

bool operator==(const OptionScale& a, const OptionScale& b) {
    return a.instrument == b.instrument && a.labels == b.labels && a.values == b.values;
}

bool operator==(const QuestionBank& a, const QuestionBank& b) {
    if (a.instrument != b.instrument || a.note != b.note || !(a.scale == b.scale)) return false;
    if (a.questions.size() != b.questions.size()) return false;
    for (std::size_t i = 0; i < a.questions.size(); ++i) {
        const auto& x = a.questions[i];
        const auto& y = b.questions[i];
        if (x.id != y.id || x.text != y.text || x.instrument != y.instrument) return false;
    }
    if (a.key.index() != b.key.index()) return false;
    if (const auto* k = std::get_if<MbtiKey>(&a.key)) {
        const auto& o = std::get<MbtiKey>(b.key);
        return k->item_axis == o.item_axis && k->polarity == o.polarity && k->rationale == o.rationale;
    }
    const auto& k = std::get<BfiKey>(a.key);
    const auto& o = std::get<BfiKey>(b.key);
    return k.item_factor == o.item_factor && k.reversed == o.reversed;
}

}  // namespace persona

#pragma once
// Item dataset loading (JSON-lines records), empirical click-through rates,
// and the engagement split that separates the reference pool from the
// enhancement targets.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "descgen/common.hpp"

namespace descgen::corpus {

struct Item {
    std::string item_id;
    std::string title;
    std::string description;
    long long clicks = 0;
    long long impressions = 1;
    std::string category;  // optional, empty allowed

    // Empty descriptions are kept: they are the enrichment targets.
    bool lacks_description() const { return trim(description).empty(); }
};

struct EmpiricalCtr {
    double value = 0.0;
};

struct SplitDataset {
    std::vector<Item> train;
    std::vector<Item> test;
    double median_ctr = 0.0;
};

struct MalformedRecord : DataError {
    std::size_t line_no;
    MalformedRecord(std::size_t line, const std::string& why)
        : DataError("malformed record at line " + std::to_string(line) + ": " + why),
          line_no(line) {}
};
struct DuplicateId : DataError {
    std::string item_id;
    explicit DuplicateId(std::string id)
        : DataError("duplicate item_id: " + id), item_id(std::move(id)) {}
};
struct ClicksExceedImpressions : DataError {
    std::string item_id;
    explicit ClicksExceedImpressions(std::string id)
        : DataError("clicks exceed impressions for item: " + id), item_id(std::move(id)) {}
};
struct TooFewItems : DataError {
    TooFewItems() : DataError("engagement split requires at least 2 items") {}
};

inline EmpiricalCtr empirical_ctr(const Item& item) {
    return EmpiricalCtr{static_cast<double>(item.clicks) / static_cast<double>(item.impressions)};
}

inline Item parse_record(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(line_no, e.what());
    }
    if (!j.is_object()) throw MalformedRecord(line_no, "record is not an object");
    Item item;
    try {
        item.item_id = j.at("item_id").get<std::string>();
        item.title = j.at("title").get<std::string>();
        item.description = j.at("description").get<std::string>();
        item.clicks = j.at("clicks").get<long long>();
        item.impressions = j.at("impressions").get<long long>();
        if (j.contains("category")) item.category = j.at("category").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(line_no, e.what());
    }
    if (item.item_id.empty()) throw MalformedRecord(line_no, "item_id must be non-empty");
    if (item.clicks < 0) throw MalformedRecord(line_no, "clicks must be non-negative");
    if (item.impressions <= 0) throw MalformedRecord(line_no, "impressions must be positive");
    if (item.clicks > item.impressions) throw ClicksExceedImpressions(item.item_id);
    return item;
}

inline std::vector<Item> parse_dataset(const std::vector<std::string>& lines) {
    std::vector<Item> items;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (trim(line).empty()) continue;
        Item item = parse_record(line, line_no);
        if (!seen.insert(item.item_id).second) throw DuplicateId(item.item_id);
        items.push_back(std::move(item));
    }
    return items;
}

inline std::vector<Item> load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_lines(path));
}

inline std::string to_record(const Item& item) {
    nlohmann::json j;
    j["item_id"] = item.item_id;
    j["title"] = item.title;
    j["description"] = item.description;
    j["clicks"] = item.clicks;
    j["impressions"] = item.impressions;
    if (!item.category.empty()) j["category"] = item.category;
    return j.dump();
}

inline void save_dataset(const std::filesystem::path& path, const std::vector<Item>& items) {
    std::string body;
    for (const auto& item : items) {
        body += to_record(item);
        body.push_back('\n');
    }
    write_file_atomic(path, body);
}

// Sorts by empirical CTR descending (ties by item_id ascending) and sends the
// top half to train, with ceil(n/2) on odd counts. Items whose CTR equals the
// boundary value always go to train, so the type invariant
// "test CTR < median_ctr <= train CTR" holds even when ties straddle the cut.
inline SplitDataset split_by_engagement(const std::vector<Item>& items) {
    if (items.size() < 2) throw TooFewItems();
    std::vector<Item> sorted = items;
    std::sort(sorted.begin(), sorted.end(), [](const Item& a, const Item& b) {
        const double ca = empirical_ctr(a).value, cb = empirical_ctr(b).value;
        if (ca != cb) return ca > cb;
        return a.item_id < b.item_id;
    });
    std::size_t cut = (sorted.size() + 1) / 2;
    const double boundary = empirical_ctr(sorted[cut - 1]).value;
    while (cut < sorted.size() && empirical_ctr(sorted[cut]).value == boundary) ++cut;

    SplitDataset split;
    split.median_ctr = boundary;
    split.train.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut));
    split.test.assign(sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
    return split;
}

}  // namespace descgen::corpus

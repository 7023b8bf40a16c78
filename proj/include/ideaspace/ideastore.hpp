#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ideaspace/errors.hpp"
#include "ideaspace/semantic.hpp"

namespace ideaspace {

struct IdeaRecord {
    std::string id;
    Statement problem;
    Statement solution;
    std::string source;
    std::int64_t created_at = 0;  // unix seconds

    static IdeaRecord make(std::string id, std::string problem, std::string solution, std::string source,
                           std::int64_t created_at = 0) {
        return IdeaRecord{std::move(id), Statement::problem(std::move(problem)),
                          Statement::solution(std::move(solution)), std::move(source), created_at};
    }
};

struct Neighbor {
    IdeaRecord record;
    double similarity = 0.0;
    std::size_t rank = 0;  // 1-based
};

struct StoreOptions {
    // Skip stored problems whose text equals the query text exactly.
    bool suppress_self_match = true;
    // Write embeddings into JSONL on save.
    bool persist_embeddings = false;
};

// Known (problem, solution) pairs with exact k-nearest-neighbour search over
// problem embeddings. Readers share, writers are exclusive.
class IdeaStore {
public:
    explicit IdeaStore(std::shared_ptr<const Embedder> embedder, StoreOptions options = {})
        : embedder_(std::move(embedder)), options_(options) {
        if (!embedder_) throw ContractViolation("IdeaStore requires an embedder");
    }

    IdeaStore(IdeaStore&& other) noexcept : embedder_(std::move(other.embedder_)), options_(other.options_) {
        std::unique_lock lock(other.mutex_);
        records_ = std::move(other.records_);
        index_ = std::move(other.index_);
    }

    IdeaStore(const IdeaStore&) = delete;
    IdeaStore& operator=(const IdeaStore&) = delete;
    IdeaStore& operator=(IdeaStore&&) = delete;

    const Embedder& embedder() const noexcept { return *embedder_; }
    std::shared_ptr<const Embedder> embedder_ptr() const noexcept { return embedder_; }
    std::string embedder_id() const { return embedder_->id(); }
    std::size_t dim() const { return embedder_->dim(); }
    const StoreOptions& options() const noexcept { return options_; }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    bool empty() const { return size() == 0; }

    // Embeds the record's problem with the store embedder (unless it already
    // carries a compatible embedding) and adds it. Returns the id; an empty
    // id is replaced by a generated one.
    std::string insert(IdeaRecord record) {
        if (record.problem.role() != Role::Problem || record.solution.role() != Role::Solution) {
            throw ContractViolation("IdeaRecord roles must be (problem, solution)");
        }
        if (auto eid = record.problem.embedder_id(); eid && *eid != embedder_->id()) {
            throw ContractViolation("record " + record.id + " embedded with " + *eid + ", store uses " +
                                    embedder_->id());
        }
        const Embedding& e = record.problem.embedding(*embedder_);
        if (e.dim() != dim()) {
            throw ContractViolation("record " + record.id + " has embedding dim " + std::to_string(e.dim()));
        }

        std::unique_lock lock(mutex_);
        if (record.id.empty()) {
            std::size_t n = records_.size();
            do {
                char buf[32];
                std::snprintf(buf, sizeof buf, "rec-%06zu", n++);
                record.id = buf;
            } while (index_.count(record.id) != 0);
        }
        if (index_.count(record.id) != 0) {
            throw ConflictError("duplicate record id: " + record.id);
        }
        index_.emplace(record.id, records_.size());
        records_.push_back(std::move(record));
        return records_.back().id;
    }

    std::optional<IdeaRecord> get(const std::string& id) const {
        std::shared_lock lock(mutex_);
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return records_[it->second];
    }

    bool contains(const std::string& id) const {
        std::shared_lock lock(mutex_);
        return index_.count(id) != 0;
    }

    // Snapshot in insertion order.
    std::vector<IdeaRecord> records() const {
        std::shared_lock lock(mutex_);
        return records_;
    }

    // Top-k stored records by cosine similarity of problem embeddings,
    // descending; ties broken by ascending id. Similarities that agree on a
    // 1e-12 grid count as tied, so rounding noise cannot split exact ties.
    // Records in `exclude` are
    // skipped, and so is any record whose problem text equals p's (when
    // self-match suppression is on).
    std::vector<Neighbor> rel(const Statement& p, std::size_t k, const std::set<std::string>& exclude = {}) const {
        if (k == 0) return {};
        if (p.role() != Role::Problem) throw ContractViolation("rel: query must be a problem statement");
        const Embedding& query = p.embedding(*embedder_);

        std::shared_lock lock(mutex_);
        if (records_.empty()) throw DomainError("rel: idea store is empty");

        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const IdeaRecord& r = records_[i];
            if (exclude.count(r.id) != 0) continue;
            if (options_.suppress_self_match && r.problem.text() == p.text()) continue;
            scored.emplace_back(cosine_similarity(query, r.problem.cached_embedding()), i);
        }
        const std::size_t take = std::min(k, scored.size());
        auto before = [this](const auto& a, const auto& b) {
            const auto ka = tie_key(a.first), kb = tie_key(b.first);
            if (ka != kb) return ka > kb;
            return records_[a.second].id < records_[b.second].id;
        };
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), before);

        std::vector<Neighbor> out;
        out.reserve(take);
        for (std::size_t r = 0; r < take; ++r) {
            out.push_back(Neighbor{records_[scored[r].second], scored[r].first, r + 1});
        }
        return out;
    }

    static constexpr double kTieGrid = 1e12;
    static std::int64_t tie_key(double similarity) { return std::llround(similarity * kTieGrid); }

    // ----- JSONL persistence -------------------------------------------------

    static nlohmann::json record_to_json(const IdeaRecord& r, bool with_embedding) {
        nlohmann::json j{{"id", r.id},
                         {"problem", r.problem.text()},
                         {"solution", r.solution.text()},
                         {"source", r.source},
                         {"created_at", r.created_at}};
        if (with_embedding && r.problem.has_embedding()) {
            const auto vals = r.problem.cached_embedding().values();
            j["embedding"] = std::vector<double>(vals.begin(), vals.end());
            j["embedder"] = *r.problem.embedder_id();
        }
        return j;
    }

    void save_jsonl(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        std::shared_lock lock(mutex_);
        for (const auto& r : records_) {
            out << record_to_json(r, options_.persist_embeddings).dump() << '\n';
        }
        if (!out) throw IoError("write failed: " + path.string());
    }

    static IdeaStore load_jsonl(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder,
                                StoreOptions options = {}) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        IdeaStore store(std::move(embedder), options);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            store.insert(parse_record_line(line, lineno, store.embedder()));
        }
        return store;
    }

    static IdeaRecord parse_record_line(const std::string& line, std::size_t lineno, const Embedder& embedder) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
        }
        if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
        auto text_field = [&](const char* name) -> std::string {
            auto it = j.find(name);
            if (it == j.end()) throw ParseError(std::string("missing field \"") + name + "\"", lineno);
            if (!it->is_string()) throw ParseError(std::string("field \"") + name + "\" must be a string", lineno);
            std::string v = it->get<std::string>();
            if (trim(v).empty()) throw ParseError(std::string("field \"") + name + "\" is empty", lineno);
            return v;
        };
        std::string id = text_field("id");
        std::string problem = text_field("problem");
        std::string solution = text_field("solution");
        std::string source = j.value("source", std::string{});
        std::int64_t created_at = j.value("created_at", std::int64_t{0});

        if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
            std::vector<double> values;
            try {
                values = it->get<std::vector<double>>();
            } catch (const nlohmann::json::exception&) {
                throw ParseError("field \"embedding\" must be an array of numbers", lineno);
            }
            const std::string eid = j.value("embedder", embedder.id());
            if (eid != embedder.id()) {
                throw ContractViolation("line " + std::to_string(lineno) + ": embedding from " + eid +
                                        ", store uses " + embedder.id());
            }
            if (values.size() != embedder.dim()) {
                throw ContractViolation("line " + std::to_string(lineno) + ": embedding dim " +
                                        std::to_string(values.size()) + ", expected " +
                                        std::to_string(embedder.dim()));
            }
            return IdeaRecord{std::move(id),
                              Statement::with_embedding(std::move(problem), Role::Problem,
                                                        Embedding(std::move(values)), eid),
                              Statement::solution(std::move(solution)), std::move(source), created_at};
        }
        return IdeaRecord::make(std::move(id), std::move(problem), std::move(solution), std::move(source),
                                created_at);
    }

private:
    std::shared_ptr<const Embedder> embedder_;
    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::vector<IdeaRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Same ids, texts, sources and timestamps in the same order.
inline bool same_contents(const IdeaStore& a, const IdeaStore& b) {
    const auto ra = a.records();
    const auto rb = b.records();
    if (ra.size() != rb.size()) return false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        if (ra[i].id != rb[i].id || ra[i].problem != rb[i].problem || ra[i].solution != rb[i].solution ||
            ra[i].source != rb[i].source || ra[i].created_at != rb[i].created_at) {
            return false;
        }
    }
    return true;
}

inline std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace ideaspace

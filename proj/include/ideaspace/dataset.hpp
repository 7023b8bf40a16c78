#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ideaspace/csv.hpp"
#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/random.hpp"

namespace ideaspace {

inline constexpr std::string_view kCompanySlot = "_COMPANY_";

inline constexpr std::string_view kExtractionTemplate =
    "Provide a short description of the problem the company _COMPANY_ solves and how it solves it "
    "separated by PROBLEM and SOLUTION headers without mentioning _COMPANY_ by name.";

inline std::string render_extraction_prompt(std::string_view company,
                                            std::string_view tmpl = kExtractionTemplate) {
    if (trim(company).empty()) throw ContractViolation("company name must be non-empty");
    return fill_slot(tmpl, kCompanySlot, company);
}

enum class RejectReason { MissingProblem, MissingSolution, Transport, Empty };

inline constexpr std::string_view to_string(RejectReason r) noexcept {
    switch (r) {
        case RejectReason::MissingProblem: return "missing_problem";
        case RejectReason::MissingSolution: return "missing_solution";
        case RejectReason::Transport: return "transport";
        case RejectReason::Empty: return "empty";
    }
    return "unknown";
}

struct Rejection {
    std::string company;
    RejectReason reason;
    std::string detail;
};

struct DatasetBuild {
    std::vector<IdeaRecord> records;
    std::vector<Rejection> rejected;
};

struct BuildOptions {
    std::size_t parallelism = 1;
    double temperature = 0.7;
    std::uint64_t seed = 0;
    std::string source = "companies";
    std::string id_prefix = "co-";
    std::string prompt_template = std::string(kExtractionTemplate);
};

// Classifies one extraction response. nullopt means accepted.
inline std::optional<RejectReason> classify_response(std::string_view raw) {
    if (trim(raw).empty()) return RejectReason::Empty;
    const Sections s = parse_sections(raw);
    if (!s.problem) return RejectReason::MissingProblem;
    if (!s.solution) return RejectReason::MissingSolution;
    if (trim(*s.problem).empty() || trim(*s.solution).empty()) return RejectReason::Empty;
    return std::nullopt;
}

// Prompts the backend once per company and keeps responses with both
// sections non-empty. Output order follows input order whatever the
// parallelism.
inline DatasetBuild build_dataset(const std::vector<std::string>& companies, const GeneratorBackend& backend,
                                  const BuildOptions& opts = {}) {
    struct Outcome {
        std::optional<IdeaRecord> record;
        std::optional<Rejection> rejection;
    };
    std::vector<Outcome> outcomes(companies.size());

    auto process = [&](std::size_t i) {
        const std::string& company = companies[i];
        std::string raw;
        try {
            raw = backend.generate(render_extraction_prompt(company, opts.prompt_template), opts.temperature,
                                   mix_seed(opts.seed, i));
        } catch (const std::exception& e) {
            outcomes[i].rejection = Rejection{company, RejectReason::Transport, e.what()};
            return;
        }
        if (auto reason = classify_response(raw)) {
            outcomes[i].rejection = Rejection{company, *reason, {}};
            return;
        }
        const Sections s = parse_sections(raw);
        char id[48];
        std::snprintf(id, sizeof id, "%s%04zu", opts.id_prefix.c_str(), i);
        outcomes[i].record = IdeaRecord::make(id, *s.problem, *s.solution, opts.source);
    };

    const std::size_t workers = std::clamp<std::size_t>(opts.parallelism, 1, std::max<std::size_t>(companies.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < companies.size(); ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < companies.size(); i = next++) process(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    DatasetBuild out;
    for (auto& o : outcomes) {
        if (o.record) out.records.push_back(std::move(*o.record));
        if (o.rejection) out.rejected.push_back(std::move(*o.rejection));
    }
    return out;
}

// Either an explicit test count or a train fraction.
struct SplitSpec {
    std::optional<std::size_t> test_count;
    std::optional<double> train_fraction;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<IdeaRecord> train;
    std::vector<IdeaRecord> test;
};

// Seeded shuffle picks the test set; both halves keep input order.
inline Split split(const std::vector<IdeaRecord>& records, const SplitSpec& spec) {
    const std::size_t n = records.size();
    std::size_t test_n = 0;
    if (spec.test_count) {
        test_n = *spec.test_count;
    } else if (spec.train_fraction) {
        const double f = *spec.train_fraction;
        if (!(f >= 0.0 && f <= 1.0)) throw DomainError("train_fraction must be in [0, 1]");
        test_n = n - static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    } else {
        throw DomainError("split needs test_count or train_fraction");
    }
    if (test_n > n) {
        throw DomainError("cannot take " + std::to_string(test_n) + " test records from " + std::to_string(n));
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(spec.seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < test_n; ++i) is_test[idx[i]] = true;

    Split out;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).push_back(records[i]);
    return out;
}

// ----- file formats ---------------------------------------------------------

// Non-empty trimmed lines of a UTF-8 text file.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

inline void write_records_jsonl(const std::vector<IdeaRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& r : records) out << IdeaStore::record_to_json(r, false).dump() << '\n';
}

inline void write_rejections_csv(const std::vector<Rejection>& rejected, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "company,reason\n";
    for (const auto& r : rejected) out << csv::join({r.company, std::string(to_string(r.reason))}) << '\n';
}

// Backend answering extraction prompts from a table of canned responses,
// keyed by company. JSONL lines: {"company": ..., "response": ...} or
// {"company": ..., "error": "..."} to simulate a transport failure.
class CannedBackend final : public GeneratorBackend {
public:
    struct Entry {
        std::optional<std::string> response;
        std::optional<std::string> error;
    };

    explicit CannedBackend(std::unordered_map<std::string, Entry> by_company,
                           std::string tmpl = std::string(kExtractionTemplate))
        : tmpl_(std::move(tmpl)) {
        for (auto& [company, entry] : by_company) by_prompt_.emplace(render_extraction_prompt(company, tmpl_), entry);
    }

    static CannedBackend from_jsonl(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        std::unordered_map<std::string, Entry> table;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(e.what(), lineno);
            }
            if (!j.contains("company") || !j["company"].is_string()) throw ParseError("missing \"company\"", lineno);
            Entry e;
            if (j.contains("response")) e.response = j["response"].get<std::string>();
            if (j.contains("error")) e.error = j["error"].get<std::string>();
            table.emplace(j["company"].get<std::string>(), std::move(e));
        }
        return CannedBackend(std::move(table));
    }

    std::string generate(const std::string& prompt, double, std::optional<std::uint64_t>) const override {
        auto it = by_prompt_.find(prompt);
        if (it == by_prompt_.end()) throw TransportError("no canned response for prompt", 1);
        if (it->second.error) throw TransportError(*it->second.error, 1);
        return it->second.response.value_or("");
    }

    std::string id() const override { return "canned"; }

private:
    std::string tmpl_;
    std::unordered_map<std::string, Entry> by_prompt_;
};

}  // namespace ideaspace

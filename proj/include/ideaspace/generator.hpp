#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ideaspace/errors.hpp"
#include "ideaspace/random.hpp"
#include "ideaspace/semantic.hpp"

namespace ideaspace {

enum class Direction { ProblemToSolution, SolutionToProblem };

inline constexpr std::string_view to_string(Direction d) noexcept {
    return d == Direction::ProblemToSolution ? "problem_to_solution" : "solution_to_problem";
}

inline constexpr Role input_role(Direction d) noexcept {
    return d == Direction::ProblemToSolution ? Role::Problem : Role::Solution;
}

inline constexpr Role output_role(Direction d) noexcept {
    return d == Direction::ProblemToSolution ? Role::Solution : Role::Problem;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

// A text completion engine. generate() may be called concurrently. With a
// fixed seed and temperature the output should be deterministic; the
// synthetic backend guarantees it.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string generate(const std::string& prompt, double temperature,
                                 std::optional<std::uint64_t> seed) const = 0;
    virtual std::string id() const = 0;
};

// Backend driven by a callable; handy for fixtures and adapters.
class CallbackBackend final : public GeneratorBackend {
public:
    using Fn = std::function<std::string(const std::string&, double, std::optional<std::uint64_t>)>;

    CallbackBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

    std::string generate(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed) const override {
        return fn_(prompt, temperature, seed);
    }
    std::string id() const override { return id_; }

private:
    std::string id_;
    Fn fn_;
};

// ---------------------------------------------------------------------------
// Temperature
// ---------------------------------------------------------------------------

// Base temperature plus a uniform burst: every draw lies in
// [base, base + burst_width]. Each draw also yields a per-call seed, so one
// schedule seed pins a whole sequence of generations.
class TemperatureSchedule {
public:
    struct Draw {
        double temperature;
        std::uint64_t seed;
    };

    explicit TemperatureSchedule(double base = 0.7, double burst_width = 0.1, std::uint64_t seed = 0)
        : base_(base), burst_width_(burst_width), seed_(seed), rng_(seed) {
        if (!(base_ >= 0.0)) throw ContractViolation("temperature base must be >= 0");
        if (!(burst_width_ >= 0.0)) throw ContractViolation("burst width must be >= 0");
    }

    double base() const noexcept { return base_; }
    double burst_width() const noexcept { return burst_width_; }
    std::uint64_t seed() const noexcept { return seed_; }

    Draw draw() {
        const double t = base_ + burst_width_ * rng_.uniform();
        return {t, rng_()};
    }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        rng_ = Rng(seed);
    }

private:
    double base_;
    double burst_width_;
    std::uint64_t seed_;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

// Replaces every occurrence of `slot` in the template with `value` in one
// pass; the inserted value is never rescanned.
inline std::string fill_slot(std::string_view tmpl, std::string_view slot, std::string_view value) {
    std::string out;
    out.reserve(tmpl.size() + value.size());
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = tmpl.find(slot, pos);
        if (hit == std::string_view::npos || slot.empty()) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, hit - pos));
        out.append(value);
        pos = hit + slot.size();
    }
    return out;
}

class PromptTemplate {
public:
    static constexpr std::string_view kSlot = "{{statement}}";

    explicit PromptTemplate(std::string text) : text_(std::move(text)) {
        const auto first = text_.find(kSlot);
        if (first == std::string::npos || text_.find(kSlot, first + 1) != std::string::npos) {
            throw ContractViolation("prompt template must contain exactly one {{statement}} slot");
        }
    }

    const std::string& text() const noexcept { return text_; }

    std::string render(std::string_view statement) const { return fill_slot(text_, kSlot, statement); }

    // Inverse of render() on the slot: the text between the fixed prefix and
    // suffix, or nullopt if `rendered` does not come from this template.
    std::optional<std::string> extract(std::string_view rendered) const {
        const auto at = text_.find(kSlot);
        const std::string_view prefix = std::string_view(text_).substr(0, at);
        const std::string_view suffix = std::string_view(text_).substr(at + kSlot.size());
        if (rendered.size() < prefix.size() + suffix.size()) return std::nullopt;
        if (rendered.substr(0, prefix.size()) != prefix) return std::nullopt;
        if (rendered.substr(rendered.size() - suffix.size()) != suffix) return std::nullopt;
        return std::string(rendered.substr(prefix.size(), rendered.size() - prefix.size() - suffix.size()));
    }

private:
    std::string text_;
};

struct PromptTemplates {
    PromptTemplate forward{"PROBLEM:\n{{statement}}\nSOLUTION:\n"};
    PromptTemplate reverse{"SOLUTION:\n{{statement}}\nPROBLEM:\n"};

    const PromptTemplate& for_direction(Direction d) const {
        return d == Direction::ProblemToSolution ? forward : reverse;
    }

    // Plain templates with an explicit task tag in front.
    static PromptTemplates tagged() {
        return PromptTemplates{PromptTemplate{"Describe a solution to the following problem.\n"
                                              "PROBLEM:\n{{statement}}\nSOLUTION:\n"},
                               PromptTemplate{"Describe the problem that the following solution solves.\n"
                                              "SOLUTION:\n{{statement}}\nPROBLEM:\n"}};
    }
};

inline std::string render_prompt(Direction direction, const Statement& input,
                                 const PromptTemplates& templates = {}) {
    return templates.for_direction(direction).render(input.text());
}

// ---------------------------------------------------------------------------
// Section parsing
// ---------------------------------------------------------------------------

struct Sections {
    std::optional<std::string> problem;
    std::optional<std::string> solution;

    bool any() const noexcept { return problem.has_value() || solution.has_value(); }
    const std::optional<std::string>& get(Role r) const { return r == Role::Problem ? problem : solution; }
};

namespace detail {

inline bool iequals_prefix(std::string_view s, std::string_view word) {
    if (s.size() < word.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(s[i])) != word[i]) return false;
    }
    return true;
}

inline void skip_spaces(std::string_view& s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
}

inline bool skip_emphasis(std::string_view& s) {
    if (s.substr(0, 2) == "**" || s.substr(0, 2) == "__") {
        s.remove_prefix(2);
        return true;
    }
    return false;
}

struct HeaderLine {
    Role role;
    std::string inline_body;
};

// Recognises "PROBLEM", "PROBLEM:", "**PROBLEM:**", "**Problem**:", "## Solution",
// optionally followed by body text after the colon.
inline std::optional<HeaderLine> match_header(std::string_view line) {
    std::string_view s = trim(line);
    while (!s.empty() && s.front() == '#') s.remove_prefix(1);
    skip_spaces(s);
    skip_emphasis(s);
    skip_spaces(s);

    Role role;
    if (iequals_prefix(s, "PROBLEM")) {
        role = Role::Problem;
        s.remove_prefix(7);
    } else if (iequals_prefix(s, "SOLUTION")) {
        role = Role::Solution;
        s.remove_prefix(8);
    } else {
        return std::nullopt;
    }
    if (!s.empty() && (std::isalnum(static_cast<unsigned char>(s.front())) || s.front() == '_' ||
                       s.front() == '-')) {
        return std::nullopt;  // "Problematic", "Solutions", ...
    }
    skip_spaces(s);
    const bool closed_before_colon = skip_emphasis(s);
    skip_spaces(s);
    bool colon = false;
    if (!s.empty() && s.front() == ':') {
        colon = true;
        s.remove_prefix(1);
    }
    skip_spaces(s);
    if (!closed_before_colon) skip_emphasis(s);
    std::string_view rest = trim(s);
    if (!colon && !rest.empty()) return std::nullopt;
    return HeaderLine{role, std::string(rest)};
}

}  // namespace detail

// Splits text on PROBLEM / SOLUTION header lines (case-insensitive, optional
// colon, optional markdown emphasis). A missing header yields nullopt; a
// present header with no body yields an empty string. The first occurrence
// of each header wins.
inline Sections parse_sections(std::string_view raw) {
    Sections out;
    std::optional<Role> current;
    std::string body;

    auto flush = [&] {
        if (!current) return;
        auto& slot = *current == Role::Problem ? out.problem : out.solution;
        if (!slot) slot = std::string(trim(body));
        body.clear();
    };

    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        if (nl == std::string_view::npos) nl = raw.size();
        std::string_view line = raw.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (auto h = detail::match_header(line)) {
            flush();
            current = h->role;
            body = h->inline_body;
        } else if (current) {
            if (!body.empty()) body.push_back('\n');
            body.append(line);
        }
        pos = nl + 1;
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// Generator: sol / pro
// ---------------------------------------------------------------------------

struct GenOutcome {
    Statement statement;
    Direction direction;
    double temperature_used;
    std::uint64_t seed_used;
    std::string prompt;
    std::string raw_output;
    std::size_t attempts;
};

// Bidirectional statement mapping: one backend per direction, each with its
// own prompt template. Unusable completions are retried up to
// `max_attempts` times at the same temperature with fresh seeds.
class Generator {
public:
    Generator(std::shared_ptr<const GeneratorBackend> forward, std::shared_ptr<const GeneratorBackend> reverse,
              PromptTemplates templates = {}, std::size_t max_attempts = 3)
        : forward_(std::move(forward)),
          reverse_(std::move(reverse)),
          templates_(std::move(templates)),
          max_attempts_(max_attempts == 0 ? 1 : max_attempts) {}

    GenOutcome sol(const Statement& p, TemperatureSchedule& sched) const {
        return map(Direction::ProblemToSolution, p, sched);
    }

    GenOutcome pro(const Statement& s, TemperatureSchedule& sched) const {
        return map(Direction::SolutionToProblem, s, sched);
    }

    GenOutcome map(Direction direction, const Statement& input, TemperatureSchedule& sched) const {
        if (input.role() != input_role(direction)) {
            throw ContractViolation(std::string(to_string(direction)) + " expects a " +
                                    std::string(to_string(input_role(direction))) + " statement");
        }
        const GeneratorBackend* backend = backend_for(direction);
        if (backend == nullptr) {
            throw ContractViolation(std::string("no backend configured for ") + std::string(to_string(direction)));
        }
        const std::string prompt = render_prompt(direction, input, templates_);
        const auto draw = sched.draw();

        std::string raw;
        for (std::size_t attempt = 1; attempt <= max_attempts_; ++attempt) {
            const std::uint64_t seed = attempt == 1 ? draw.seed : mix_seed(draw.seed, attempt);
            backend_calls_.fetch_add(1, std::memory_order_relaxed);
            raw = backend->generate(prompt, draw.temperature, seed);
            if (auto text = extract_output(raw, output_role(direction))) {
                (direction == Direction::ProblemToSolution ? sol_calls_ : pro_calls_)
                    .fetch_add(1, std::memory_order_relaxed);
                return GenOutcome{Statement(std::move(*text), output_role(direction)),
                                  direction,
                                  draw.temperature,
                                  seed,
                                  prompt,
                                  std::move(raw),
                                  attempt};
            }
        }
        throw GenerationError("no usable " + std::string(to_string(output_role(direction))) + " after " +
                              std::to_string(max_attempts_) + " attempts; last output: " + raw.substr(0, 200));
    }

    // The wanted section if headers are present, otherwise the whole
    // completion. Empty results are unusable.
    static std::optional<std::string> extract_output(std::string_view raw, Role wanted) {
        const Sections sec = parse_sections(raw);
        std::string text;
        if (sec.any()) {
            if (!sec.get(wanted)) return std::nullopt;
            text = *sec.get(wanted);
        } else {
            text = std::string(trim(raw));
        }
        if (trim(text).empty()) return std::nullopt;
        return text;
    }

    const GeneratorBackend* backend_for(Direction d) const {
        return d == Direction::ProblemToSolution ? forward_.get() : reverse_.get();
    }

    const PromptTemplates& templates() const noexcept { return templates_; }

    std::uint64_t sol_calls() const noexcept { return sol_calls_.load(); }
    std::uint64_t pro_calls() const noexcept { return pro_calls_.load(); }
    std::uint64_t backend_calls() const noexcept { return backend_calls_.load(); }

private:
    std::shared_ptr<const GeneratorBackend> forward_;
    std::shared_ptr<const GeneratorBackend> reverse_;
    PromptTemplates templates_;
    std::size_t max_attempts_;
    mutable std::atomic<std::uint64_t> sol_calls_{0};
    mutable std::atomic<std::uint64_t> pro_calls_{0};
    mutable std::atomic<std::uint64_t> backend_calls_{0};
};

}  // namespace ideaspace

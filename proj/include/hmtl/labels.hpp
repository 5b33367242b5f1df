#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>
#include <string_view>

#include "hmtl/error.hpp"

namespace hmtl {

// Enumerator order is the class index used by the model heads and the
// final tie-break order for voting.
enum class LabelA : std::uint8_t { Off, Not };
enum class LabelB : std::uint8_t { Tin, Unt, Null };
enum class LabelC : std::uint8_t { Ind, Grp, Oth, Null };

enum class Task : std::uint8_t { A, B, C };

inline constexpr std::array<Task, 3> kTasks{Task::A, Task::B, Task::C};

template <class Label>
struct LabelTraits;

template <>
struct LabelTraits<LabelA> {
    static constexpr Task task = Task::A;
    static constexpr std::array<std::string_view, 2> names{"OFF", "NOT"};
};

template <>
struct LabelTraits<LabelB> {
    static constexpr Task task = Task::B;
    static constexpr std::array<std::string_view, 3> names{"TIN", "UNT", "NULL"};
};

template <>
struct LabelTraits<LabelC> {
    static constexpr Task task = Task::C;
    static constexpr std::array<std::string_view, 4> names{"IND", "GRP", "OTH", "NULL"};
};

template <class Label>
inline constexpr std::size_t kClassCount = LabelTraits<Label>::names.size();

constexpr std::size_t class_count(Task t) {
    switch (t) {
        case Task::A: return kClassCount<LabelA>;
        case Task::B: return kClassCount<LabelB>;
        case Task::C: return kClassCount<LabelC>;
    }
    return 0;
}

constexpr std::string_view task_name(Task t) {
    switch (t) {
        case Task::A: return "A";
        case Task::B: return "B";
        case Task::C: return "C";
    }
    return "?";
}

template <class Label>
constexpr std::string_view to_string(Label l) {
    return LabelTraits<Label>::names[static_cast<std::size_t>(l)];
}

template <class Label>
constexpr std::size_t index_of(Label l) {
    return static_cast<std::size_t>(l);
}

template <class Label>
Label label_from_index(std::size_t i) {
    if (i >= kClassCount<Label>) throw Error("label index out of range");
    return static_cast<Label>(i);
}

template <class Label>
std::optional<Label> parse_label(std::string_view s) {
    const auto& names = LabelTraits<Label>::names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == s) return static_cast<Label>(i);
    }
    return std::nullopt;
}

/// Class name for a class index of a given task.
inline std::string_view class_name(Task t, std::size_t index) {
    switch (t) {
        case Task::A: return to_string(label_from_index<LabelA>(index));
        case Task::B: return to_string(label_from_index<LabelB>(index));
        case Task::C: return to_string(label_from_index<LabelC>(index));
    }
    return "?";
}

/// Labels for the three levels. Construction enforces the hierarchy:
/// B is NULL exactly when A is NOT, and C is NULL exactly when B is UNT or NULL.
class LabelTriple {
public:
    LabelTriple() = default;

    LabelTriple(LabelA a, LabelB b, LabelC c) : a_(a), b_(b), c_(c) {
        if (!consistent(a, b, c)) {
            throw HierarchyError("label triple (" + std::string(to_string(a)) + ", " + std::string(to_string(b)) +
                                 ", " + std::string(to_string(c)) + ") violates the label hierarchy");
        }
    }

    static constexpr bool consistent(LabelA a, LabelB b, LabelC c) {
        const bool b_null = b == LabelB::Null;
        const bool a_not = a == LabelA::Not;
        const bool c_null = c == LabelC::Null;
        const bool b_untargeted = b == LabelB::Unt || b == LabelB::Null;
        return (b_null == a_not) && (c_null == b_untargeted);
    }

    /// Every triple the hierarchy admits, in enum order.
    static std::vector<LabelTriple> all_consistent() {
        std::vector<LabelTriple> out;
        for (std::size_t a = 0; a < kClassCount<LabelA>; ++a) {
            for (std::size_t b = 0; b < kClassCount<LabelB>; ++b) {
                for (std::size_t c = 0; c < kClassCount<LabelC>; ++c) {
                    const auto la = label_from_index<LabelA>(a);
                    const auto lb = label_from_index<LabelB>(b);
                    const auto lc = label_from_index<LabelC>(c);
                    if (consistent(la, lb, lc)) out.emplace_back(la, lb, lc);
                }
            }
        }
        return out;
    }

    LabelA a() const { return a_; }
    LabelB b() const { return b_; }
    LabelC c() const { return c_; }

    std::size_t index(Task t) const {
        switch (t) {
            case Task::A: return index_of(a_);
            case Task::B: return index_of(b_);
            case Task::C: return index_of(c_);
        }
        return 0;
    }

    friend bool operator==(const LabelTriple&, const LabelTriple&) = default;

private:
    LabelA a_ = LabelA::Not;
    LabelB b_ = LabelB::Null;
    LabelC c_ = LabelC::Null;
};

}  // namespace hmtl

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vecbind/ndarray.hpp"

namespace vecbind {

/// Syntactic form of a parameter declaration. The form decides the
/// expected rank: a plain scalar is rank 0, any chain of pointers is
/// rank 1, and a bracketed array has one rank per dimension.
struct DeclForm {
    enum class Kind { Scalar, PointerChain, DimensionedArray };

    Kind kind = Kind::Scalar;
    int pointer_depth = 0;                // PointerChain only
    std::vector<std::int64_t> dims;       // DimensionedArray only

    bool operator==(const DeclForm&) const = default;
};

struct ParamDecl {
    std::string name;
    ElemType base = ElemType::Real64;
    DeclForm form;

    int declared_rank() const {
        switch (form.kind) {
            case DeclForm::Kind::Scalar: return 0;
            case DeclForm::Kind::PointerChain: return 1;
            case DeclForm::Kind::DimensionedArray:
                return static_cast<int>(form.dims.size());
        }
        return 0;
    }

    bool operator==(const ParamDecl&) const = default;
};

/// Parsed prototype. Return types are scalar only (void, double, int, or
/// a single string); parameter names are unique.
struct FuncDecl {
    std::string name;
    std::optional<ElemType> return_type;  // nullopt = void
    std::vector<ParamDecl> params;

    const ParamDecl* find_param(const std::string& pname) const {
        for (const auto& p : params)
            if (p.name == pname) return &p;
        return nullptr;
    }

    bool operator==(const FuncDecl&) const = default;
};

/// Signature transformation applied when generating a wrapper: output
/// parameters become return values and length parameters disappear, their
/// values inferred from array extents.
struct Annotation {
    std::string target;                       // function name; empty = any
    std::vector<std::string> out_params;
    struct OmittedLen {
        std::string param;
        std::optional<std::string> source;    // visible array supplying the extent
        bool operator==(const OmittedLen&) const = default;
    };
    std::vector<OmittedLen> omitted_len_params;

    bool operator==(const Annotation&) const = default;
};

enum class Intent { In, Out };

/// The call contract a generated wrapper enforces: which parameters the
/// caller passes, which are synthesized, and what comes back.
struct WrapperPlan {
    struct VisibleParam {
        std::string name;
        ElemType base = ElemType::Real64;
        int expected_rank = 0;
        Intent intent = Intent::In;
        bool operator==(const VisibleParam&) const = default;
    };
    struct HiddenParam {
        enum class Role { LenOf, AllocOut };
        std::string name;
        Role role = Role::AllocOut;
        std::string source;                   // LenOf: visible param supplying the extent
        bool operator==(const HiddenParam&) const = default;
    };
    struct OutputSpec {
        ElemType base = ElemType::Real64;
        int prescribed_rank = 0;
        std::string from;                     // "return" or the lifted parameter name
        bool operator==(const OutputSpec&) const = default;
    };

    FuncDecl decl;
    std::vector<VisibleParam> visible_params;
    std::vector<HiddenParam> hidden_params;
    std::vector<OutputSpec> output_spec;

    const VisibleParam* find_visible(const std::string& pname) const {
        for (const auto& p : visible_params)
            if (p.name == pname) return &p;
        return nullptr;
    }

    bool operator==(const WrapperPlan&) const = default;
};

}  // namespace vecbind

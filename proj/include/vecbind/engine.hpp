#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vecbind/decl.hpp"
#include "vecbind/dispatch.hpp"
#include "vecbind/ndarray.hpp"

namespace vecbind {

enum class ExecMode { Serial, Parallel, Auto };
enum class ExecPath { Serial, Parallel };

ExecMode exec_mode_from_name(const std::string& name);
const char* exec_mode_name(ExecMode m);

/// How calls are executed. Auto runs parallel only when the work size is
/// strictly above min_elements, mirroring an `if (size > min)` clause on
/// the parallel loop.
struct ExecConfig {
    ExecMode mode = ExecMode::Auto;
    std::int64_t min_elements = 1000;
    int num_workers = 1;

    /// Defaults, with VECBIND_MIN_ELEMENTS and VECBIND_NUM_WORKERS
    /// environment overrides applied.
    static ExecConfig from_env();
};

ExecConfig set_threshold(ExecConfig cfg, std::int64_t value);

/// Probe of the most recent engine operation: which path ran and why.
struct ExecStats {
    ExecPath path = ExecPath::Serial;
    std::int64_t work_items = 0;  // loop iterations (calls) or element count (operators)
    int workers = 1;
    bool parallel_eligible = false;
};

/// Per-iteration view of one declared parameter (or the return slot).
struct Slice {
    ElemType etype = ElemType::Real64;
    const std::byte* in = nullptr;   // null for allocated outputs
    std::byte* out = nullptr;        // null for inputs
    std::int64_t extent = 0;         // elements this invocation touches
};

/// Argument accessor handed to kernel bodies, indexed by the parameter's
/// position in the original declaration. Omitted length parameters read
/// as scalar ints carrying the inferred extent.
class KernelArgs {
public:
    std::size_t param_count() const { return params_.size(); }

    double f64(std::size_t i) const { return *in_ptr<double>(i, ElemType::Real64); }
    std::int64_t i64(std::size_t i) const { return *in_ptr<std::int64_t>(i, ElemType::Int64); }
    const std::string& str(std::size_t i) const { return *in_ptr<std::string>(i, ElemType::Str); }

    std::span<const double> f64_slice(std::size_t i) const {
        return {in_ptr<double>(i, ElemType::Real64), extent(i)};
    }
    std::span<const std::int64_t> i64_slice(std::size_t i) const {
        return {in_ptr<std::int64_t>(i, ElemType::Int64), extent(i)};
    }
    std::span<const std::string> str_slice(std::size_t i) const {
        return {in_ptr<std::string>(i, ElemType::Str), extent(i)};
    }

    std::span<double> out_f64(std::size_t i) const {
        return {out_ptr<double>(i, ElemType::Real64), extent(i)};
    }
    std::span<std::int64_t> out_i64(std::size_t i) const {
        return {out_ptr<std::int64_t>(i, ElemType::Int64), extent(i)};
    }
    std::span<std::string> out_str(std::size_t i) const {
        return {out_ptr<std::string>(i, ElemType::Str), extent(i)};
    }

    double& ret_f64() const { return *ret_ptr<double>(ElemType::Real64); }
    std::int64_t& ret_i64() const { return *ret_ptr<std::int64_t>(ElemType::Int64); }
    std::string& ret_str() const { return *ret_ptr<std::string>(ElemType::Str); }

private:
    friend class Engine;
    KernelArgs(std::span<const Slice> params, const Slice* ret)
        : params_(params), ret_(ret) {}

    std::size_t extent(std::size_t i) const {
        return static_cast<std::size_t>(params_[i].extent);
    }

    const Slice& slot(std::size_t i, ElemType want) const {
        if (i >= params_.size())
            throw Error("kernel body accessed parameter " + std::to_string(i) +
                        " of " + std::to_string(params_.size()));
        if (params_[i].etype != want)
            throw Error("kernel body accessed parameter " + std::to_string(i) + " (" +
                        elem_type_name(params_[i].etype) + ") as " + elem_type_name(want));
        return params_[i];
    }

    template <typename T>
    const T* in_ptr(std::size_t i, ElemType want) const {
        const Slice& s = slot(i, want);
        if (!s.in) throw Error("kernel body read output-only parameter " + std::to_string(i));
        return reinterpret_cast<const T*>(s.in);
    }

    template <typename T>
    T* out_ptr(std::size_t i, ElemType want) const {
        const Slice& s = slot(i, want);
        if (!s.out) throw Error("kernel body wrote input parameter " + std::to_string(i));
        return reinterpret_cast<T*>(s.out);
    }

    template <typename T>
    T* ret_ptr(ElemType want) const {
        if (!ret_) throw Error("kernel body assigned a return value of a void kernel");
        if (ret_->etype != want)
            throw Error(std::string("kernel body assigned ") + elem_type_name(want) +
                        " return on a " + elem_type_name(ret_->etype) + " kernel");
        return reinterpret_cast<T*>(ret_->out);
    }

    std::span<const Slice> params_;
    const Slice* ret_;
};

/// A host callable plus the number of declared parameters it consumes.
struct KernelBody {
    std::size_t arity = 0;
    std::function<void(const KernelArgs&)> fn;
};

struct Kernel {
    std::string name;
    WrapperPlan plan;
    KernelBody body;
    bool pure = true;  // deterministic and side-effect free; required for parallel runs
};

enum class BinaryOp { Add, Sub, Mul, Div, Le, Gt, Pow };

BinaryOp binary_op_from_name(const std::string& name);
const char* binary_op_name(BinaryOp op);

/// Contiguous near-equal split of [0, n) into `parts` ranges.
std::pair<std::int64_t, std::int64_t> chunk_range(std::int64_t n, int parts, int idx);

/// Executes vectorized calls over registered kernels, and the
/// data-parallel elementwise operators. Outputs are written by at most
/// one worker per disjoint index range; the engine itself must be driven
/// from one caller thread at a time.
class Engine {
public:
    /// Bind a declaration + annotation to a body. Re-registration under
    /// the same name replaces the previous binding.
    const Kernel& register_kernel(const FuncDecl& decl, const Annotation& ann, KernelBody body,
                                  bool pure = true);

    const Kernel* find(const std::string& name) const;
    const Kernel& at(const std::string& name) const;
    std::vector<std::string> kernel_names() const;

    /// Run one vectorized call: validate, allocate outputs, and iterate
    /// the kernel body serially or across workers.
    std::vector<NdArray> call(const Kernel& kernel, std::span<const NdArray> args,
                              const ExecConfig& cfg);
    std::vector<NdArray> call(const std::string& name, std::span<const NdArray> args,
                              const ExecConfig& cfg);

    /// Elementwise binary operator. Operands must share a shape, or
    /// either may be a scalar. Relational results are int64 0/1; pow is
    /// always real64.
    NdArray elementwise(BinaryOp op, const NdArray& a, const NdArray& b,
                        const ExecConfig& cfg);

    /// Ascending flat indices of the nonzero mask elements.
    NdArray where(const NdArray& mask, const ExecConfig& cfg);

    const ExecStats& last_exec() const { return last_; }

private:
    bool decide_parallel(const ExecConfig& cfg, std::int64_t work, bool eligible);

    std::unordered_map<std::string, Kernel> kernels_;
    ExecStats last_;
};

/// Register the stock demo kernels: sin, cos, exp, log, hypot, atof, vmult.
void register_builtin_kernels(Engine& engine);

}  // namespace vecbind

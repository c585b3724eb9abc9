#include "vecbind/engine.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vecbind/parser.hpp"

namespace vecbind {

namespace {

int default_workers() {
#ifdef _OPENMP
    return omp_get_num_procs();
#else
    unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(n) : 1;
#endif
}

std::int64_t env_int(const char* name, std::int64_t fallback) {
    const char* v = std::getenv(name);
    if (!v || !*v) return fallback;
    char* end = nullptr;
    long long parsed = std::strtoll(v, &end, 10);
    if (end == v || *end) return fallback;
    return parsed;
}

}  // namespace

ExecMode exec_mode_from_name(const std::string& name) {
    if (name == "serial") return ExecMode::Serial;
    if (name == "parallel") return ExecMode::Parallel;
    if (name == "auto") return ExecMode::Auto;
    throw UsageError("unknown execution mode '" + name + "'");
}

const char* exec_mode_name(ExecMode m) {
    switch (m) {
        case ExecMode::Serial: return "serial";
        case ExecMode::Parallel: return "parallel";
        case ExecMode::Auto: return "auto";
    }
    return "?";
}

ExecConfig ExecConfig::from_env() {
    ExecConfig cfg;
    cfg.min_elements = env_int("VECBIND_MIN_ELEMENTS", cfg.min_elements);
    cfg.num_workers = static_cast<int>(env_int("VECBIND_NUM_WORKERS", default_workers()));
    if (cfg.num_workers < 1) cfg.num_workers = 1;
    return cfg;
}

ExecConfig set_threshold(ExecConfig cfg, std::int64_t value) {
    cfg.min_elements = value;
    return cfg;
}

BinaryOp binary_op_from_name(const std::string& name) {
    if (name == "add" || name == "+") return BinaryOp::Add;
    if (name == "sub" || name == "-") return BinaryOp::Sub;
    if (name == "mul" || name == "*") return BinaryOp::Mul;
    if (name == "div" || name == "/") return BinaryOp::Div;
    if (name == "le" || name == "<=") return BinaryOp::Le;
    if (name == "gt" || name == ">") return BinaryOp::Gt;
    if (name == "pow" || name == "^") return BinaryOp::Pow;
    throw UsageError("unknown operator '" + name + "'");
}

const char* binary_op_name(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "add";
        case BinaryOp::Sub: return "sub";
        case BinaryOp::Mul: return "mul";
        case BinaryOp::Div: return "div";
        case BinaryOp::Le: return "le";
        case BinaryOp::Gt: return "gt";
        case BinaryOp::Pow: return "pow";
    }
    return "?";
}

std::pair<std::int64_t, std::int64_t> chunk_range(std::int64_t n, int parts, int idx) {
    const std::int64_t p = parts;
    const std::int64_t i = idx;
    return {n * i / p, n * (i + 1) / p};
}

const Kernel& Engine::register_kernel(const FuncDecl& decl, const Annotation& ann,
                                      KernelBody body, bool pure) {
    if (body.arity != decl.params.size())
        throw RegistrationError("kernel '" + decl.name + "' declares " +
                                std::to_string(decl.params.size()) +
                                " parameters but its body takes " +
                                std::to_string(body.arity));
    Kernel k;
    k.name = decl.name;
    k.plan = apply_annotations(decl, ann);
    k.body = std::move(body);
    k.pure = pure;
    auto [it, inserted] = kernels_.insert_or_assign(decl.name, std::move(k));
    (void)inserted;  // replacing an existing binding is allowed
    return it->second;
}

const Kernel* Engine::find(const std::string& name) const {
    auto it = kernels_.find(name);
    return it == kernels_.end() ? nullptr : &it->second;
}

const Kernel& Engine::at(const std::string& name) const {
    const Kernel* k = find(name);
    if (!k) throw UsageError("no kernel registered under '" + name + "'");
    return *k;
}

std::vector<std::string> Engine::kernel_names() const {
    std::vector<std::string> names;
    names.reserve(kernels_.size());
    for (const auto& [name, k] : kernels_) names.push_back(name);
    std::sort(names.begin(), names.end());
    return names;
}

bool Engine::decide_parallel(const ExecConfig& cfg, std::int64_t work, bool eligible) {
#ifndef _OPENMP
    eligible = false;
#endif
    bool par = false;
    switch (cfg.mode) {
        case ExecMode::Serial: par = false; break;
        case ExecMode::Parallel: par = eligible; break;
        case ExecMode::Auto: par = eligible && work > cfg.min_elements; break;
    }
    last_.path = par ? ExecPath::Parallel : ExecPath::Serial;
    last_.work_items = work;
    last_.workers = par ? cfg.num_workers : 1;
    last_.parallel_eligible = eligible;
    return par;
}

namespace {

/// One output buffer under construction.
struct OutBuf {
    ElemType etype;
    Shape shape;
    std::int64_t per_iter = 1;  // elements written per call
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
    std::vector<std::string> str;

    std::byte* base() {
        switch (etype) {
            case ElemType::Real64: return reinterpret_cast<std::byte*>(f64.data());
            case ElemType::Int64: return reinterpret_cast<std::byte*>(i64.data());
            case ElemType::Str: return reinterpret_cast<std::byte*>(str.data());
        }
        return nullptr;
    }

    NdArray finish() {
        switch (etype) {
            case ElemType::Real64: return NdArray::take(std::move(shape), std::move(f64));
            case ElemType::Int64: return NdArray::take(std::move(shape), std::move(i64));
            case ElemType::Str: return NdArray::take(std::move(shape), std::move(str));
        }
        throw Error("unreachable");
    }
};

OutBuf alloc_out(ElemType t, Shape shape, std::int64_t per_iter) {
    OutBuf b;
    b.etype = t;
    b.per_iter = per_iter;
    const std::size_t n = static_cast<std::size_t>(shape.element_count());
    b.shape = std::move(shape);
    switch (t) {
        case ElemType::Real64: b.f64.assign(n, 0.0); break;
        case ElemType::Int64: b.i64.assign(n, 0); break;
        case ElemType::Str: b.str.assign(n, std::string()); break;
    }
    return b;
}

/// Slot table plus per-iteration byte steps; advancing it is the direct
/// analogue of striding each wrapper argument after a call.
struct CallFrame {
    std::vector<Slice> slots;     // one per declared parameter
    std::vector<std::ptrdiff_t> in_steps;
    std::vector<std::ptrdiff_t> out_steps;
    Slice ret;
    std::ptrdiff_t ret_step = 0;
    bool has_ret = false;

    void advance() {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            slots[i].in += in_steps[i];
            slots[i].out += out_steps[i];
        }
        ret.out += ret_step;
    }

    void seek(std::int64_t iter) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            slots[i].in += in_steps[i] * iter;
            slots[i].out += out_steps[i] * iter;
        }
        ret.out += ret_step * iter;
    }
};

}  // namespace

std::vector<NdArray> Engine::call(const std::string& name, std::span<const NdArray> args,
                                  const ExecConfig& cfg) {
    return call(at(name), args, cfg);
}

std::vector<NdArray> Engine::call(const Kernel& kernel, std::span<const NdArray> args,
                                  const ExecConfig& cfg) {
    const WrapperPlan& plan = kernel.plan;
    const VecSpec spec = validate(args, plan);
    const std::int64_t iters = spec.num_iterations;

    // widen int arguments passed to real parameters
    std::vector<NdArray> coerced(args.size());
    std::vector<const NdArray*> actual(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (plan.visible_params[i].base == ElemType::Real64 &&
            args[i].etype() == ElemType::Int64) {
            coerced[i] = args[i].widened_to_real();
            actual[i] = &coerced[i];
        } else {
            actual[i] = &args[i];
        }
    }

    const Shape& master_shape = args[static_cast<std::size_t>(spec.master)].shape();

    std::vector<OutBuf> outs;
    outs.reserve(plan.output_spec.size());
    for (const auto& os : plan.output_spec) {
        Shape oshape = output_shape(spec, os, master_shape);
        const std::int64_t per_iter = oshape.element_count() / iters;
        outs.push_back(alloc_out(os.base, std::move(oshape), per_iter));
    }

    // inferred length values, one stable slot per omitted parameter
    std::vector<std::int64_t> len_values;
    len_values.reserve(plan.hidden_params.size());

    auto visible_index = [&](const std::string& pname) -> std::size_t {
        for (std::size_t i = 0; i < plan.visible_params.size(); ++i)
            if (plan.visible_params[i].name == pname) return i;
        throw Error("plan inconsistency: no visible parameter '" + pname + "'");
    };
    auto output_index = [&](const std::string& pname) -> std::size_t {
        for (std::size_t i = 0; i < plan.output_spec.size(); ++i)
            if (plan.output_spec[i].from == pname) return i;
        throw Error("plan inconsistency: no output for parameter '" + pname + "'");
    };

    for (const auto& hp : plan.hidden_params) {
        if (hp.role == WrapperPlan::HiddenParam::Role::LenOf) {
            const std::size_t src = visible_index(hp.source);
            len_values.push_back(spec.slice_extents[src]);
        }
    }

    CallFrame frame;
    frame.slots.resize(plan.decl.params.size());
    frame.in_steps.assign(plan.decl.params.size(), 0);
    frame.out_steps.assign(plan.decl.params.size(), 0);
    std::size_t next_len = 0;
    for (std::size_t p = 0; p < plan.decl.params.size(); ++p) {
        const std::string& pname = plan.decl.params[p].name;
        Slice& s = frame.slots[p];
        if (const auto* vp = plan.find_visible(pname)) {
            const std::size_t vi = visible_index(pname);
            s.etype = vp->base;
            s.in = static_cast<const std::byte*>(actual[vi]->raw());
            s.extent = spec.slice_extents[vi];
            frame.in_steps[p] = static_cast<std::ptrdiff_t>(spec.strides[vi]) *
                                static_cast<std::ptrdiff_t>(elem_type_size(vp->base));
        } else {
            // hidden parameter
            const auto* hp = [&]() -> const WrapperPlan::HiddenParam* {
                for (const auto& h : plan.hidden_params)
                    if (h.name == pname) return &h;
                throw Error("plan inconsistency: parameter '" + pname + "' unaccounted for");
            }();
            if (hp->role == WrapperPlan::HiddenParam::Role::LenOf) {
                s.etype = ElemType::Int64;
                s.in = reinterpret_cast<const std::byte*>(&len_values[next_len++]);
                s.extent = 1;
            } else {
                OutBuf& buf = outs[output_index(pname)];
                s.etype = buf.etype;
                s.out = buf.base();
                s.extent = buf.per_iter;
                frame.out_steps[p] = static_cast<std::ptrdiff_t>(buf.per_iter) *
                                     static_cast<std::ptrdiff_t>(elem_type_size(buf.etype));
            }
        }
    }
    if (plan.decl.return_type) {
        OutBuf& buf = outs[output_index("return")];
        frame.has_ret = true;
        frame.ret.etype = buf.etype;
        frame.ret.out = buf.base();
        frame.ret.extent = buf.per_iter;
        frame.ret_step = static_cast<std::ptrdiff_t>(buf.per_iter) *
                         static_cast<std::ptrdiff_t>(elem_type_size(buf.etype));
    }

    // Parallel runs index every argument; a reused (stride 0) argument or
    // an impure body forces the serial path regardless of mode.
    bool eligible = kernel.pure;
    for (auto s : spec.strides)
        if (s == 0) eligible = false;
    const bool parallel = decide_parallel(cfg, iters, eligible);

    const auto& fn = kernel.body.fn;
    if (!parallel) {
        CallFrame f = frame;
        KernelArgs view(f.slots, f.has_ret ? &f.ret : nullptr);
        std::int64_t it = 0;
        try {
            for (; it < iters; ++it) {
                fn(view);
                f.advance();
            }
        } catch (const std::exception& e) {
            throw KernelError(std::string("kernel '") + kernel.name + "' failed: " + e.what(),
                              it);
        }
    } else {
#ifdef _OPENMP
        const int workers = cfg.num_workers;
        std::atomic<std::int64_t> fail_iter{std::numeric_limits<std::int64_t>::max()};
        std::string fail_msg;
        std::mutex fail_mutex;

#pragma omp parallel for num_threads(workers) schedule(static, 1)
        for (int c = 0; c < workers; ++c) {
            auto [lo, hi] = chunk_range(iters, workers, c);
            if (lo >= hi) continue;
            CallFrame f = frame;
            f.seek(lo);
            KernelArgs view(f.slots, f.has_ret ? &f.ret : nullptr);
            std::int64_t it = lo;
            try {
                for (; it < hi; ++it) {
                    fn(view);
                    f.advance();
                }
            } catch (const std::exception& e) {
                std::int64_t prev = fail_iter.load();
                while (it < prev && !fail_iter.compare_exchange_weak(prev, it)) {
                }
                std::lock_guard<std::mutex> lock(fail_mutex);
                if (fail_iter.load() == it) fail_msg = e.what();
            }
        }
        if (fail_iter.load() != std::numeric_limits<std::int64_t>::max())
            throw KernelError("kernel '" + kernel.name + "' failed: " + fail_msg,
                              fail_iter.load());
#endif
    }

    std::vector<NdArray> results;
    results.reserve(outs.size());
    for (auto& o : outs) results.push_back(o.finish());
    return results;
}

namespace {

struct EwShape {
    Shape shape;          // result shape
    std::int64_t n = 0;   // elements
    int sa = 1, sb = 1;   // operand index strides (0 broadcasts a scalar)
};

EwShape ew_shape(const NdArray& a, const NdArray& b) {
    EwShape r;
    if (a.shape() == b.shape()) {
        r.shape = a.shape();
    } else if (a.rank() == 0) {
        r.shape = b.shape();
        r.sa = 0;
    } else if (b.rank() == 0) {
        r.shape = a.shape();
        r.sb = 0;
    } else {
        throw VectorError("Array shape or length mismatch");
    }
    r.n = r.shape.element_count();
    return r;
}

template <typename R, typename A, typename B, typename F>
void ew_loop(R* out, const A* a, int sa, const B* b, int sb, std::int64_t n, bool parallel,
             int workers, F f) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static) if (parallel)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        out[i] = f(a[i * sa], b[i * sb]);
}

double as_f64(const NdArray& x, std::int64_t i) {
    return x.etype() == ElemType::Real64 ? x.f64()[static_cast<std::size_t>(i)]
                                         : static_cast<double>(x.i64()[static_cast<std::size_t>(i)]);
}

}  // namespace

NdArray Engine::elementwise(BinaryOp op, const NdArray& a, const NdArray& b,
                            const ExecConfig& cfg) {
    if (a.etype() == ElemType::Str || b.etype() == ElemType::Str)
        throw UsageError("operators are not defined on str arrays");

    const EwShape es = ew_shape(a, b);
    const bool parallel = decide_parallel(cfg, es.n, true);
    const int workers = cfg.num_workers;

    const bool both_int = a.etype() == ElemType::Int64 && b.etype() == ElemType::Int64;
    const bool relational = op == BinaryOp::Le || op == BinaryOp::Gt;

    if (relational) {
        std::vector<std::int64_t> out(static_cast<std::size_t>(es.n));
        auto run = [&](auto cmp) {
            if (both_int) {
                ew_loop(out.data(), a.i64().data(), es.sa, b.i64().data(), es.sb, es.n,
                        parallel, workers, cmp);
            } else if (a.etype() == ElemType::Real64 && b.etype() == ElemType::Real64) {
                ew_loop(out.data(), a.f64().data(), es.sa, b.f64().data(), es.sb, es.n,
                        parallel, workers, cmp);
            } else {
                const NdArray aw = a.widened_to_real();
                const NdArray bw = b.widened_to_real();
                ew_loop(out.data(), aw.f64().data(), es.sa, bw.f64().data(), es.sb, es.n,
                        parallel, workers, cmp);
            }
        };
        if (op == BinaryOp::Le)
            run([](auto x, auto y) -> std::int64_t { return x <= y ? 1 : 0; });
        else
            run([](auto x, auto y) -> std::int64_t { return x > y ? 1 : 0; });
        return NdArray::take(es.shape, std::move(out));
    }

    if (op == BinaryOp::Pow) {
        std::vector<double> out(static_cast<std::size_t>(es.n));
        const NdArray aw = a.widened_to_real();
        const NdArray bw = b.widened_to_real();
        ew_loop(out.data(), aw.f64().data(), es.sa, bw.f64().data(), es.sb, es.n, parallel,
                workers, [](double x, double y) { return std::pow(x, y); });
        return NdArray::take(es.shape, std::move(out));
    }

    if (both_int) {
        if (op == BinaryOp::Div) {
            // C semantics; reject zero divisors up front so the loop can
            // run unguarded
            const auto bd = b.i64();
            for (std::int64_t i = 0; i < es.n; ++i)
                if (bd[static_cast<std::size_t>(i * es.sb)] == 0)
                    throw KernelError("integer division by zero", i);
        }
        std::vector<std::int64_t> out(static_cast<std::size_t>(es.n));
        auto run = [&](auto f) {
            ew_loop(out.data(), a.i64().data(), es.sa, b.i64().data(), es.sb, es.n, parallel,
                    workers, f);
        };
        switch (op) {
            case BinaryOp::Add: run([](std::int64_t x, std::int64_t y) { return x + y; }); break;
            case BinaryOp::Sub: run([](std::int64_t x, std::int64_t y) { return x - y; }); break;
            case BinaryOp::Mul: run([](std::int64_t x, std::int64_t y) { return x * y; }); break;
            case BinaryOp::Div: run([](std::int64_t x, std::int64_t y) { return x / y; }); break;
            default: throw Error("unreachable");
        }
        return NdArray::take(es.shape, std::move(out));
    }

    const NdArray aw = a.widened_to_real();
    const NdArray bw = b.widened_to_real();
    std::vector<double> out(static_cast<std::size_t>(es.n));
    auto run = [&](auto f) {
        ew_loop(out.data(), aw.f64().data(), es.sa, bw.f64().data(), es.sb, es.n, parallel,
                workers, f);
    };
    switch (op) {
        case BinaryOp::Add: run([](double x, double y) { return x + y; }); break;
        case BinaryOp::Sub: run([](double x, double y) { return x - y; }); break;
        case BinaryOp::Mul: run([](double x, double y) { return x * y; }); break;
        case BinaryOp::Div: run([](double x, double y) { return x / y; }); break;
        default: throw Error("unreachable");
    }
    return NdArray::take(es.shape, std::move(out));
}

NdArray Engine::where(const NdArray& mask, const ExecConfig& cfg) {
    if (mask.etype() == ElemType::Str)
        throw UsageError("where is not defined on str arrays");

    const std::int64_t n = mask.size();
    auto nonzero = [&](std::int64_t i) -> bool {
        return mask.etype() == ElemType::Real64
                   ? mask.f64()[static_cast<std::size_t>(i)] != 0.0
                   : mask.i64()[static_cast<std::size_t>(i)] != 0;
    };

    const bool parallel = decide_parallel(cfg, n, true);
    std::vector<std::int64_t> out;

    if (!parallel) {
        for (std::int64_t i = 0; i < n; ++i)
            if (nonzero(i)) out.push_back(i);
    } else {
#ifdef _OPENMP
        // count per chunk, prefix, then fill each chunk's disjoint range
        const int workers = cfg.num_workers;
        std::vector<std::int64_t> counts(static_cast<std::size_t>(workers) + 1, 0);
#pragma omp parallel for num_threads(workers) schedule(static, 1)
        for (int c = 0; c < workers; ++c) {
            auto [lo, hi] = chunk_range(n, workers, c);
            std::int64_t cnt = 0;
            for (std::int64_t i = lo; i < hi; ++i)
                if (nonzero(i)) ++cnt;
            counts[static_cast<std::size_t>(c) + 1] = cnt;
        }
        for (int c = 0; c < workers; ++c)
            counts[static_cast<std::size_t>(c) + 1] += counts[static_cast<std::size_t>(c)];
        out.resize(static_cast<std::size_t>(counts.back()));
#pragma omp parallel for num_threads(workers) schedule(static, 1)
        for (int c = 0; c < workers; ++c) {
            auto [lo, hi] = chunk_range(n, workers, c);
            std::int64_t at = counts[static_cast<std::size_t>(c)];
            for (std::int64_t i = lo; i < hi; ++i)
                if (nonzero(i)) out[static_cast<std::size_t>(at++)] = i;
        }
#endif
    }

    const std::int64_t count = static_cast<std::int64_t>(out.size());
    return NdArray::take(Shape{count}, std::move(out));
}

void register_builtin_kernels(Engine& engine) {
    const auto decls = parse_declarations(
        "double sin(double x);\n"
        "double cos(double x);\n"
        "double exp(double x);\n"
        "double log(double x);\n"
        "double hypot(double x, double y);\n"
        "double atof(const char *s);\n"
        "void vmult(double *x, double *y, double *result, int len);\n");

    auto unary = [&](const FuncDecl& d, double (*f)(double)) {
        engine.register_kernel(
            d, {}, {1, [f](const KernelArgs& a) { a.ret_f64() = f(a.f64(0)); }});
    };
    unary(decls[0], [](double x) { return std::sin(x); });
    unary(decls[1], [](double x) { return std::cos(x); });
    unary(decls[2], [](double x) { return std::exp(x); });
    unary(decls[3], [](double x) { return std::log(x); });

    engine.register_kernel(decls[4], {}, {2, [](const KernelArgs& a) {
                               a.ret_f64() = std::hypot(a.f64(0), a.f64(1));
                           }});

    // C atof: skip leading whitespace, parse the longest numeric prefix,
    // yield 0.0 when nothing parses
    engine.register_kernel(decls[5], {}, {1, [](const KernelArgs& a) {
                               a.ret_f64() = std::strtod(a.str(0).c_str(), nullptr);
                           }});

    Annotation vm;
    vm.target = "vmult";
    vm.out_params = {"result"};
    vm.omitted_len_params = {{"len", std::nullopt}};
    engine.register_kernel(decls[6], vm, {4, [](const KernelArgs& a) {
                               const auto x = a.f64_slice(0);
                               const auto y = a.f64_slice(1);
                               const auto out = a.out_f64(2);
                               const std::int64_t len = a.i64(3);
                               for (std::int64_t i = 0; i < len; ++i)
                                   out[static_cast<std::size_t>(i)] =
                                       x[static_cast<std::size_t>(i)] *
                                       y[static_cast<std::size_t>(i)];
                           }});
}

}  // namespace vecbind

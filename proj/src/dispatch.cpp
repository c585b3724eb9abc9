#include "vecbind/dispatch.hpp"

#include <limits>
#include <sstream>

namespace vecbind {

namespace {

constexpr const char* kMismatch = "Array shape or length mismatch";

Shape excess_dims(const Shape& actual, int expected) {
    return actual.leading(actual.rank() - expected);
}

void check_rank(const Shape& actual, int expected) {
    if (actual.rank() < expected)
        throw RankError("actual rank " + std::to_string(actual.rank()) +
                        " is below expected rank " + std::to_string(expected));
}

/// Elements one kernel invocation consumes from a parameter of expected
/// rank `er`, read off the master's trailing dims. When the master is too
/// shallow the argument's own trailing dims define its slice.
std::int64_t slice_need(const Shape& master, const Shape& actual, int er) {
    if (er <= master.rank()) return checked_product(master.trailing(er).dims());
    return checked_product(actual.trailing(er).dims());
}

void check_arg_count(std::size_t got, const WrapperPlan& plan) {
    if (got != plan.visible_params.size())
        throw UsageError("'" + plan.decl.name + "' expects " +
                         std::to_string(plan.visible_params.size()) + " arguments, got " +
                         std::to_string(got));
}

}  // namespace

int expected_rank(const ParamDecl& param) { return param.declared_rank(); }

int select_master(std::span<const Shape> actual_shapes, const WrapperPlan& plan) {
    check_arg_count(actual_shapes.size(), plan);
    int master = 0;
    int best_excess = -1;
    for (std::size_t i = 0; i < actual_shapes.size(); ++i) {
        const int er = plan.visible_params[i].expected_rank;
        check_rank(actual_shapes[i], er);
        const int excess = actual_shapes[i].rank() - er;
        if (excess > best_excess) {
            best_excess = excess;
            master = static_cast<int>(i);
        }
    }
    return master;
}

int select_master(std::span<const NdArray> args, const WrapperPlan& plan) {
    std::vector<Shape> shapes;
    shapes.reserve(args.size());
    for (const auto& a : args) shapes.push_back(a.shape());
    return select_master(std::span<const Shape>(shapes), plan);
}

std::int64_t num_iterations(const Shape& actual, int er) {
    check_rank(actual, er);
    if (actual.rank() == er) return 1;
    return checked_product(excess_dims(actual, er).dims());
}

std::int64_t stride(const Shape& actual, int er) {
    check_rank(actual, er);
    return checked_product(actual.trailing(er).dims());
}

VecSpec validate_shapes(std::span<const Shape> actual_shapes, const WrapperPlan& plan) {
    check_arg_count(actual_shapes.size(), plan);
    if (actual_shapes.empty()) {
        // nothing to iterate over: a single plain call
        return VecSpec{0, 1, {}, {}, Shape{}, false};
    }

    for (std::size_t i = 0; i < actual_shapes.size(); ++i) {
        check_rank(actual_shapes[i], plan.visible_params[i].expected_rank);
        if (actual_shapes[i].element_count() == 0)
            throw VectorError(kMismatch);
    }

    VecSpec spec;
    spec.master = select_master(actual_shapes, plan);
    const Shape& master_shape = actual_shapes[static_cast<std::size_t>(spec.master)];
    const int master_er = plan.visible_params[static_cast<std::size_t>(spec.master)].expected_rank;
    spec.out_excess_dims = excess_dims(master_shape, master_er);
    spec.num_iterations = num_iterations(master_shape, master_er);

    spec.strides.resize(actual_shapes.size());
    spec.slice_extents.resize(actual_shapes.size());
    for (std::size_t i = 0; i < actual_shapes.size(); ++i) {
        const Shape& shape = actual_shapes[i];
        const int er = plan.visible_params[i].expected_rank;
        const std::int64_t need = slice_need(master_shape, shape, er);
        const Shape excess = excess_dims(shape, er);
        const std::int64_t own_slice = checked_product(shape.trailing(er).dims());

        spec.slice_extents[i] = need;
        if (excess == spec.out_excess_dims && own_slice == need) {
            // isomorphic: advances in lockstep with the master
            spec.strides[i] = own_slice;
        } else if (shape.element_count() == need) {
            // exactly one call's worth, re-read every iteration
            spec.strides[i] = 0;
        } else {
            throw VectorError(kMismatch);
        }
        if (shape.rank() > er) spec.vectored = true;
    }
    return spec;
}

VecSpec validate(std::span<const NdArray> args, const WrapperPlan& plan) {
    check_arg_count(args.size(), plan);
    std::vector<Shape> shapes;
    shapes.reserve(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& vp = plan.visible_params[i];
        const ElemType at = args[i].etype();
        const bool ok = at == vp.base || (at == ElemType::Int64 && vp.base == ElemType::Real64);
        if (!ok)
            throw UsageError("argument " + std::to_string(i + 1) + " of '" + plan.decl.name +
                             "' (" + vp.name + "): cannot pass " + elem_type_name(at) +
                             " where " + elem_type_name(vp.base) + " is expected");
        shapes.push_back(args[i].shape());
    }
    return validate_shapes(std::span<const Shape>(shapes), plan);
}

Shape output_shape(const VecSpec& spec, const WrapperPlan::OutputSpec& out,
                   const Shape& master_shape) {
    if (out.prescribed_rank == 0) return spec.out_excess_dims;
    if (out.prescribed_rank > master_shape.rank())
        throw RankError("output rank " + std::to_string(out.prescribed_rank) +
                        " exceeds master rank " + std::to_string(master_shape.rank()));
    return spec.out_excess_dims.concat(master_shape.trailing(out.prescribed_rank));
}

ShapeReport explain_call(std::span<const Shape> actual_shapes, const WrapperPlan& plan) {
    ShapeReport report;
    for (std::size_t i = 0; i < actual_shapes.size() && i < plan.visible_params.size(); ++i) {
        ShapeReport::Entry e;
        e.name = plan.visible_params[i].name;
        e.expected_rank = plan.visible_params[i].expected_rank;
        e.actual_rank = actual_shapes[i].rank();
        if (e.actual_rank >= e.expected_rank)
            e.excess_dims = actual_shapes[i].leading(e.actual_rank - e.expected_rank);
        report.args.push_back(std::move(e));
    }
    try {
        VecSpec spec = validate_shapes(actual_shapes, plan);
        report.master = spec.master;
        report.num_iterations = spec.num_iterations;
        report.vectored = spec.vectored;
        for (std::size_t i = 0; i < report.args.size(); ++i) {
            report.args[i].stride = spec.strides[i];
            report.args[i].slice_extent = spec.slice_extents[i];
        }
        const Shape& master_shape = actual_shapes[static_cast<std::size_t>(spec.master)];
        for (const auto& out : plan.output_spec)
            report.outputs.emplace_back(out.from, output_shape(spec, out, master_shape));
    } catch (const Error& e) {
        report.failure = e.what();
    }
    return report;
}

std::string ShapeReport::to_string() const {
    std::ostringstream os;
    if (failure) {
        os << "invalid call: " << *failure << '\n';
    } else {
        os << "vectored: " << (vectored ? "yes" : "no") << '\n'
           << "master: arg " << master
           << (args.empty() ? "" : " (" + args[static_cast<std::size_t>(master)].name + ")")
           << '\n'
           << "iterations: " << num_iterations << '\n';
    }
    os << "arg  name          expected  actual  excess        stride  slice\n";
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-4zu %-13s %-9d %-7d %-13s %-7lld %lld\n", i,
                      a.name.c_str(), a.expected_rank, a.actual_rank,
                      a.excess_dims.to_string().c_str(),
                      static_cast<long long>(a.stride),
                      static_cast<long long>(a.slice_extent));
        os << buf;
    }
    for (const auto& [name, shape] : outputs)
        os << "output " << name << ": shape " << shape.to_string() << '\n';
    return os.str();
}

}  // namespace vecbind

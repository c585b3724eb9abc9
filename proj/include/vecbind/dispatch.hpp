#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vecbind/decl.hpp"
#include "vecbind/ndarray.hpp"

namespace vecbind {

/// Runtime parameters of one vectorized call. An argument whose leading
/// excess dims match the master's advances by its stride each iteration;
/// a stride-0 argument is re-read whole every iteration.
struct VecSpec {
    int master = 0;                         // index among visible arguments
    std::int64_t num_iterations = 1;
    std::vector<std::int64_t> strides;      // per visible argument, 0 = reused
    std::vector<std::int64_t> slice_extents;  // elements one call consumes per argument
    Shape out_excess_dims;                  // prepended to each output's prescribed shape
    bool vectored = false;                  // any actual rank above its expected rank
};

/// Per-argument diagnostic view of a (possibly failed) dispatch.
struct ShapeReport {
    struct Entry {
        std::string name;
        int expected_rank = 0;
        int actual_rank = 0;
        Shape excess_dims;
        std::int64_t stride = 0;
        std::int64_t slice_extent = 0;
    };
    std::vector<Entry> args;
    int master = 0;
    std::int64_t num_iterations = 1;
    bool vectored = false;
    std::vector<std::pair<std::string, Shape>> outputs;  // name, resulting shape
    std::optional<std::string> failure;

    std::string to_string() const;
};

/// Rank the parameter's declaration expects of its arguments.
int expected_rank(const ParamDecl& param);

/// Index of the visible argument with the highest excess rank, leftmost
/// on ties. Ranks below expectation raise RankError.
int select_master(std::span<const Shape> actual_shapes, const WrapperPlan& plan);
int select_master(std::span<const NdArray> args, const WrapperPlan& plan);

/// Iterations a vectored call performs: 1 when the actual rank equals the
/// expected rank, otherwise the product of the leading excess dims.
std::int64_t num_iterations(const Shape& actual, int expected_rank);

/// Elements one slice spans: the product of the trailing expected dims.
std::int64_t stride(const Shape& actual, int expected_rank);

/// Validate shapes against the plan and compute the vectorization
/// parameters. Shape conflicts raise VectorError with the message
/// "Array shape or length mismatch".
VecSpec validate_shapes(std::span<const Shape> actual_shapes, const WrapperPlan& plan);

/// Full validation of actual arguments: element-type coercibility plus
/// validate_shapes.
VecSpec validate(std::span<const NdArray> args, const WrapperPlan& plan);

/// Shape of one output: the master's excess dims followed by the trailing
/// `prescribed_rank` dims of the master shape.
Shape output_shape(const VecSpec& spec, const WrapperPlan::OutputSpec& out,
                   const Shape& master_shape);

/// Dry-run diagnostics for the given argument shapes; never throws, the
/// failure field carries any validation error instead.
ShapeReport explain_call(std::span<const Shape> actual_shapes, const WrapperPlan& plan);

}  // namespace vecbind

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anr/tape.hpp"

// Differentiable primitives. Every op records one node on the operands' tape.
namespace anr::ops {

/// [m x k] . [k x n]. Rank-1 operands are treated as a single row.
Var matmul(Var a, Var b);
/// a . b^T without materializing the transpose node.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

// Elementwise binaries. Shapes must match, or one operand must hold a single element.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double factor);
Var shift(Var a, double offset);

/// relu'(0) is taken as 0.
Var relu(Var a);
Var sin(Var a);
Var exp(Var a);
Var square(Var a);

enum class Reduce { sum, mean, max };

/// Reduces along `axis`, removing it. Max routes gradient to the first maximal index.
Var reduce(Reduce op, Var a, std::size_t axis);
/// Reduction over all elements to a scalar.
Var sum(Var a);
Var mean(Var a);

/// x[m x n] + b[n] broadcast across rows.
Var add_row(Var x, Var bias);

Var reshape(Var a, Shape shape);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

}  // namespace anr::ops

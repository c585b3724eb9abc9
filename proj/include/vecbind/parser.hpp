#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vecbind/decl.hpp"

namespace vecbind {

// Accepted grammar, a prototype-only C subset:
//
//   unit      := { prototype }
//   prototype := ret-type NAME '(' params? ')' ';'
//   ret-type  := 'void' | 'double' | 'int' | ['const'] 'char' '*'
//   params    := 'void' | param { ',' param }
//   param     := ['const'] base '*'* NAME? ( '[' INT ']' )* | ['const'] base '*'*
//   base      := 'double' | 'int' | 'char'
//
// `char` must carry at least one star; the first star folds into the Str
// base type, so `char *s` is a rank-0 string. Unnamed parameters get
// positional names arg1, arg2, ... Block and line comments are skipped.
// Structs, typedefs, varargs, function pointers, and mixed pointer/array
// declarators raise UnsupportedDeclError.

/// Parse every prototype in `source`, in order.
std::vector<FuncDecl> parse_declarations(std::string_view source);

/// Render a FuncDecl back to canonical prototype text.
std::string unparse(const FuncDecl& decl);

/// Parse a line-oriented annotation file. Directives:
///   function <name>
///   out <param>
///   omit_len <param> [from <param>]
std::vector<Annotation> parse_annotations(std::string_view source);

/// Annotation for `fn` from a parsed annotation list (empty one if absent).
Annotation annotation_for(const std::vector<Annotation>& anns, const std::string& fn);

/// Combine a declaration with an annotation into the wrapper call contract.
WrapperPlan apply_annotations(const FuncDecl& decl, const Annotation& ann);

}  // namespace vecbind

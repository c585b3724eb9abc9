#include "vecbind/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace vecbind {

namespace {

struct Token {
    enum class Kind { Ident, Integer, Punct, End };
    Kind kind = Kind::End;
    std::string text;
    std::int64_t value = 0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws_and_comments();
        Token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= src_.size()) return t;

        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            t.kind = Token::Kind::Ident;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                t.text += advance();
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            t.kind = Token::Kind::Integer;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                t.text += advance();
            t.value = std::stoll(t.text);
            return t;
        }
        if (std::string_view("*()[],;.").find(c) != std::string_view::npos) {
            t.kind = Token::Kind::Punct;
            t.text = advance();
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
    }

private:
    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                int l = line_, col = column_;
                advance();
                advance();
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/'))
                    advance();
                if (pos_ + 1 >= src_.size())
                    throw ParseError("unterminated block comment", l, col);
                advance();
                advance();
            } else {
                break;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

const std::set<std::string> kUnsupportedKeywords = {
    "struct", "union", "enum",  "typedef", "float",    "long",
    "short",  "signed", "unsigned", "static", "extern", "inline"};

class DeclParser {
public:
    explicit DeclParser(std::string_view src) : lex_(src) { shift(); }

    std::vector<FuncDecl> parse_unit() {
        std::vector<FuncDecl> decls;
        while (cur_.kind != Token::Kind::End) decls.push_back(parse_prototype());
        return decls;
    }

private:
    void shift() { cur_ = lex_.next(); }

    bool at_punct(char c) const {
        return cur_.kind == Token::Kind::Punct && cur_.text[0] == c;
    }

    void expect_punct(char c, const char* what) {
        if (!at_punct(c))
            throw ParseError(std::string("expected '") + c + "' " + what + ", found '" +
                                 (cur_.kind == Token::Kind::End ? "<eof>" : cur_.text) + "'",
                             cur_.line, cur_.column);
        shift();
    }

    bool at_ident(const char* word) const {
        return cur_.kind == Token::Kind::Ident && cur_.text == word;
    }

    void reject_unsupported_keyword() const {
        if (cur_.kind == Token::Kind::Ident && kUnsupportedKeywords.count(cur_.text))
            throw UnsupportedDeclError("unsupported construct '" + cur_.text + "' at line " +
                                       std::to_string(cur_.line));
    }

    // base type with an optional leading const; for char the first star
    // is folded into the Str base
    ElemType parse_base() {
        reject_unsupported_keyword();
        if (at_ident("const")) {
            shift();
            reject_unsupported_keyword();
        }
        if (at_ident("double")) {
            shift();
            return ElemType::Real64;
        }
        if (at_ident("int")) {
            shift();
            return ElemType::Int64;
        }
        if (at_ident("char")) {
            Token at = cur_;
            shift();
            if (!at_punct('*'))
                throw UnsupportedDeclError(
                    "plain 'char' parameter at line " + std::to_string(at.line) +
                    "; only 'char *' strings are supported");
            shift();
            return ElemType::Str;
        }
        if (cur_.kind == Token::Kind::Ident)
            throw UnsupportedDeclError("unsupported type '" + cur_.text + "' at line " +
                                       std::to_string(cur_.line));
        throw ParseError("expected a type name, found '" + cur_.text + "'", cur_.line,
                         cur_.column);
    }

    FuncDecl parse_prototype() {
        FuncDecl decl;

        reject_unsupported_keyword();
        if (at_ident("void")) {
            shift();
            if (at_punct('*'))
                throw UnsupportedDeclError("'void *' return type at line " +
                                           std::to_string(cur_.line));
            decl.return_type = std::nullopt;
        } else {
            ElemType rt = parse_base();
            if (at_punct('*'))
                throw UnsupportedDeclError("pointer return type at line " +
                                           std::to_string(cur_.line));
            decl.return_type = rt;
        }

        if (cur_.kind != Token::Kind::Ident)
            throw ParseError("expected function name, found '" + cur_.text + "'", cur_.line,
                             cur_.column);
        decl.name = cur_.text;
        shift();

        expect_punct('(', "after function name");
        if (at_ident("void")) {
            shift();
        } else if (!at_punct(')')) {
            decl.params.push_back(parse_param(decl.params.size()));
            while (at_punct(',')) {
                shift();
                decl.params.push_back(parse_param(decl.params.size()));
            }
        }
        expect_punct(')', "after parameter list");
        expect_punct(';', "after prototype");

        std::set<std::string> seen;
        for (const auto& p : decl.params)
            if (!seen.insert(p.name).second)
                throw ParseError("duplicate parameter name '" + p.name + "' in " + decl.name,
                                 cur_.line, cur_.column);
        return decl;
    }

    ParamDecl parse_param(std::size_t position) {
        if (at_punct('.'))
            throw UnsupportedDeclError("varargs parameter at line " + std::to_string(cur_.line));

        ParamDecl p;
        p.base = parse_base();

        int stars = 0;
        while (at_punct('*')) {
            ++stars;
            shift();
        }

        if (at_punct('(') )
            throw UnsupportedDeclError("function pointer parameter at line " +
                                       std::to_string(cur_.line));

        if (cur_.kind == Token::Kind::Ident) {
            reject_unsupported_keyword();
            p.name = cur_.text;
            shift();
        } else {
            p.name = "arg" + std::to_string(position + 1);
        }

        std::vector<std::int64_t> dims;
        while (at_punct('[')) {
            shift();
            if (at_punct(']')) {
                // `x[]` decays to a pointer
                shift();
                if (!dims.empty())
                    throw ParseError("only the outermost array dimension may be empty",
                                     cur_.line, cur_.column);
                ++stars;
                if (at_punct('['))
                    throw ParseError("dimension list after empty brackets", cur_.line,
                                     cur_.column);
                break;
            }
            if (cur_.kind != Token::Kind::Integer)
                throw ParseError("expected integer array dimension, found '" + cur_.text + "'",
                                 cur_.line, cur_.column);
            if (cur_.value <= 0)
                throw ParseError("array dimension must be positive", cur_.line, cur_.column);
            dims.push_back(cur_.value);
            shift();
            expect_punct(']', "after array dimension");
        }

        if (stars > 0 && !dims.empty())
            throw UnsupportedDeclError("mixed pointer and array declarator for '" + p.name +
                                       "'");

        if (!dims.empty()) {
            p.form = {DeclForm::Kind::DimensionedArray, 0, std::move(dims)};
        } else if (stars > 0) {
            p.form = {DeclForm::Kind::PointerChain, stars, {}};
        } else {
            p.form = {DeclForm::Kind::Scalar, 0, {}};
        }
        return p;
    }

    Lexer lex_;
    Token cur_;
};

std::string base_text(ElemType t) {
    switch (t) {
        case ElemType::Real64: return "double";
        case ElemType::Int64: return "int";
        case ElemType::Str: return "char *";
    }
    return "?";
}

}  // namespace

std::vector<FuncDecl> parse_declarations(std::string_view source) {
    return DeclParser(source).parse_unit();
}

std::string unparse(const FuncDecl& decl) {
    std::ostringstream os;
    if (!decl.return_type) {
        os << "void ";
    } else if (*decl.return_type == ElemType::Str) {
        os << "char *";
    } else {
        os << base_text(*decl.return_type) << ' ';
    }
    os << decl.name << '(';
    if (decl.params.empty()) os << "void";
    for (std::size_t i = 0; i < decl.params.size(); ++i) {
        if (i) os << ", ";
        const auto& p = decl.params[i];
        os << base_text(p.base);
        if (p.base != ElemType::Str) os << ' ';
        for (int s = 0; s < p.form.pointer_depth; ++s) os << '*';
        os << p.name;
        for (auto d : p.form.dims) os << '[' << d << ']';
    }
    os << ");";
    return os.str();
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

}  // namespace

std::vector<Annotation> parse_annotations(std::string_view source) {
    std::vector<Annotation> anns;
    Annotation* cur = nullptr;
    std::istringstream is{std::string(source)};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        auto words = split_ws(line);
        if (words.empty()) continue;
        const std::string& dir = words[0];
        auto fail = [&](const std::string& why) {
            throw AnnotationError("line " + std::to_string(lineno) + ": " + why);
        };
        if (dir == "function") {
            if (words.size() != 2) fail("'function' takes exactly one name");
            anns.push_back(Annotation{words[1], {}, {}});
            cur = &anns.back();
        } else if (dir == "out") {
            if (!cur) fail("'out' before any 'function' directive");
            if (words.size() != 2) fail("'out' takes exactly one parameter name");
            cur->out_params.push_back(words[1]);
        } else if (dir == "omit_len") {
            if (!cur) fail("'omit_len' before any 'function' directive");
            if (words.size() == 2) {
                cur->omitted_len_params.push_back({words[1], std::nullopt});
            } else if (words.size() == 4 && words[2] == "from") {
                cur->omitted_len_params.push_back({words[1], words[3]});
            } else {
                fail("'omit_len' takes '<param>' or '<param> from <param>'");
            }
        } else {
            fail("unknown directive '" + dir + "'");
        }
    }
    return anns;
}

Annotation annotation_for(const std::vector<Annotation>& anns, const std::string& fn) {
    for (const auto& a : anns)
        if (a.target == fn) return a;
    return Annotation{fn, {}, {}};
}

WrapperPlan apply_annotations(const FuncDecl& decl, const Annotation& ann) {
    if (!ann.target.empty() && ann.target != decl.name)
        throw AnnotationError("annotation targets '" + ann.target + "' but declaration is '" +
                              decl.name + "'");

    auto require_param = [&](const std::string& pname) -> const ParamDecl& {
        const ParamDecl* p = decl.find_param(pname);
        if (!p)
            throw AnnotationError("annotation references unknown parameter '" + pname +
                                  "' of " + decl.name);
        return *p;
    };

    std::set<std::string> outs;
    for (const auto& o : ann.out_params) {
        const ParamDecl& p = require_param(o);
        if (p.declared_rank() < 1)
            throw AnnotationError("out parameter '" + o +
                                  "' must have pointer or array form");
        if (!outs.insert(o).second)
            throw AnnotationError("duplicate out parameter '" + o + "'");
    }
    std::set<std::string> omitted;
    for (const auto& ol : ann.omitted_len_params) {
        const ParamDecl& p = require_param(ol.param);
        if (p.declared_rank() != 0 || p.base != ElemType::Int64)
            throw AnnotationError("omit_len parameter '" + ol.param +
                                  "' must be a scalar int");
        if (outs.count(ol.param))
            throw AnnotationError("parameter '" + ol.param +
                                  "' cannot be both out and omit_len");
        if (!omitted.insert(ol.param).second)
            throw AnnotationError("duplicate omit_len parameter '" + ol.param + "'");
    }

    WrapperPlan plan;
    plan.decl = decl;
    for (const auto& p : decl.params) {
        if (outs.count(p.name) || omitted.count(p.name)) continue;
        plan.visible_params.push_back({p.name, p.base, p.declared_rank(), Intent::In});
    }

    auto resolve_len_source = [&](const Annotation::OmittedLen& ol) -> std::string {
        if (ol.source) {
            const auto* vis = plan.find_visible(*ol.source);
            if (!vis)
                throw AnnotationError("omit_len source '" + *ol.source +
                                      "' is not a visible parameter");
            if (vis->expected_rank < 1)
                throw AnnotationError("omit_len source '" + *ol.source +
                                      "' is not an array parameter");
            return *ol.source;
        }
        // default: first visible array parameter
        for (const auto& vp : plan.visible_params)
            if (vp.expected_rank >= 1) return vp.name;
        throw AnnotationError("no visible array parameter to infer '" + ol.param + "' from");
    };

    for (const auto& p : decl.params) {
        if (outs.count(p.name)) {
            plan.hidden_params.push_back({p.name, WrapperPlan::HiddenParam::Role::AllocOut, ""});
        } else if (omitted.count(p.name)) {
            auto it = std::find_if(ann.omitted_len_params.begin(), ann.omitted_len_params.end(),
                                   [&](const auto& ol) { return ol.param == p.name; });
            plan.hidden_params.push_back(
                {p.name, WrapperPlan::HiddenParam::Role::LenOf, resolve_len_source(*it)});
        }
    }

    if (decl.return_type)
        plan.output_spec.push_back({*decl.return_type, 0, "return"});
    for (const auto& p : decl.params)
        if (outs.count(p.name))
            plan.output_spec.push_back({p.base, p.declared_rank(), p.name});

    return plan;
}

}  // namespace vecbind

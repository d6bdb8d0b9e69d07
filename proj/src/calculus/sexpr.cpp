#include "mrsession/calculus/sexpr.hpp"

#include <cctype>
#include <charconv>
#include <set>

#include "overloaded.hpp"

namespace mrsession::calc {

std::string format_type(const Viewtype& t) {
  return std::visit(overloaded{
                        [](const ty::Bool&) { return std::string("bool"); },
                        [](const ty::Int&) { return std::string("int"); },
                        [](const ty::IntExact& i) { return "(int " + std::to_string(i.n) + ")"; },
                        [](const ty::Str&) { return std::string("str"); },
                        [](const ty::Unit&) { return std::string("unit"); },
                        [](const ty::Chan& c) {
                          return "(chan " + format_role_set(c.group) + " \"" +
                                 format_session(c.proto) + "\")";
                        },
                        [](const ty::Prod& p) {
                          return "(prod " + format_type(p.a) + " " + format_type(p.b) + ")";
                        },
                        [](const ty::Tensor& p) {
                          return "(tensor " + format_type(p.a) + " " + format_type(p.b) + ")";
                        },
                        [](const ty::Arrow& a) {
                          return std::string(a.kind == ArrowKind::Linear ? "(-o " : "(-> ") +
                                 format_type(a.param) + " " + format_type(a.result) + ")";
                        },
                    },
                    t.node().v);
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

}  // namespace

std::string format_expr(const Expr& e) {
  return std::visit(
      overloaded{
          [](const ex::Var& v) { return v.name; },
          [](const ex::Res& r) {
            return std::string("ch") + (r.half.positive ? "+" : "-") + std::to_string(r.half.id);
          },
          [](const ex::Int& i) { return std::to_string(i.value); },
          [](const ex::Bool& b) { return std::string(b.value ? "true" : "false"); },
          [](const ex::Str& s) { return quote(s.value); },
          [](const ex::Unit&) { return std::string("unit"); },
          [](const ex::Pair& p) { return "(pair " + format_expr(p.a) + " " + format_expr(p.b) + ")"; },
          [](const ex::Fst& p) { return "(fst " + format_expr(p.e) + ")"; },
          [](const ex::Snd& p) { return "(snd " + format_expr(p.e) + ")"; },
          [](const ex::LetPair& p) {
            return "(letp (" + p.x1 + " " + p.x2 + ") " + format_expr(p.bound) + " " +
                   format_expr(p.body) + ")";
          },
          [](const ex::Lam& l) {
            std::string kind;
            if (l.kind) kind = *l.kind == ArrowKind::Linear ? ":l " : ":i ";
            return "(lam " + kind + "(" + l.x + " " + format_type(l.param) + ") " +
                   format_expr(l.body) + ")";
          },
          [](const ex::App& a) { return "(app " + format_expr(a.f) + " " + format_expr(a.a) + ")"; },
          [](const ex::Fix& f) {
            return "(fix (" + f.f + " " + format_type(f.ann) + ") " + format_expr(f.body) + ")";
          },
          [](const ex::If& i) {
            return "(if " + format_expr(i.c) + " " + format_expr(i.t) + " " + format_expr(i.e) + ")";
          },
          [](const ex::Prim& p) {
            std::string out = "(" + std::string(prim_name(p.op));
            for (const auto& a : p.args) out += " " + format_expr(a);
            return out + ")";
          },
      },
      e.node().v);
}

std::string format_pool(const Pool& p) {
  std::string out = "(pool (nrole " + std::to_string(p.universe.nrole()) + ")";
  for (const auto& [h, t] : p.sigma) {
    out += "\n  (res " + format_expr(Expr::res(h)) + " " + format_type(t) + ")";
  }
  for (const auto& [tid, e] : p.threads) {
    out += "\n  (thread " + std::to_string(tid) + " " + format_expr(e) + ")";
  }
  return out + ")\n";
}

namespace {

struct Token {
  enum Kind { Open, Close, Atom, String, End } kind;
  std::string text;
  std::size_t pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view t) : t_(t) {}

  Token next() {
    skip();
    if (pos_ >= t_.size()) return {Token::End, "", pos_};
    std::size_t start = pos_;
    char c = t_[pos_];
    if (c == '(') return ++pos_, Token{Token::Open, "(", start};
    if (c == ')') return ++pos_, Token{Token::Close, ")", start};
    if (c == '"') return {Token::String, string_lit(), start};
    if (c == '{') {
      while (pos_ < t_.size() && t_[pos_] != '}') ++pos_;
      if (pos_ >= t_.size()) throw SyntaxError(start, "unterminated role set");
      ++pos_;
      return {Token::Atom, std::string(t_.substr(start, pos_ - start)), start};
    }
    while (pos_ < t_.size() && !std::isspace(static_cast<unsigned char>(t_[pos_])) &&
           t_[pos_] != '(' && t_[pos_] != ')' && t_[pos_] != '"' && t_[pos_] != ';') {
      ++pos_;
    }
    return {Token::Atom, std::string(t_.substr(start, pos_ - start)), start};
  }

 private:
  void skip() {
    while (pos_ < t_.size()) {
      if (std::isspace(static_cast<unsigned char>(t_[pos_]))) {
        ++pos_;
      } else if (t_[pos_] == ';') {
        while (pos_ < t_.size() && t_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string string_lit() {
    std::size_t start = pos_++;
    std::string out;
    while (pos_ < t_.size() && t_[pos_] != '"') {
      char c = t_[pos_++];
      if (c == '\\') {
        if (pos_ >= t_.size()) break;
        char d = t_[pos_++];
        switch (d) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"':
          case '\\': out += d; break;
          default: throw SyntaxError(pos_ - 1, std::string("unknown escape \\") + d);
        }
      } else {
        out += c;
      }
    }
    if (pos_ >= t_.size()) throw SyntaxError(start, "unterminated string");
    ++pos_;
    return out;
  }

  std::string_view t_;
  std::size_t pos_ = 0;
};

bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'')) return false;
  }
  return s != "unit" && s != "true" && s != "false";
}

std::optional<std::int64_t> as_int(const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<ChannelHalf> as_res(const std::string& s) {
  if (s.size() < 4 || s.rfind("ch", 0) != 0 || (s[2] != '+' && s[2] != '-')) return std::nullopt;
  std::uint64_t id = 0;
  auto [p, ec] = std::from_chars(s.data() + 3, s.data() + s.size(), id);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return ChannelHalf{id, s[2] == '+'};
}

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) { advance(); }

  Viewtype type() {
    Token t = take();
    if (t.kind == Token::Atom) {
      if (t.text == "int") return Viewtype::integer();
      if (t.text == "bool") return Viewtype::boolean();
      if (t.text == "str") return Viewtype::str();
      if (t.text == "unit") return Viewtype::unit();
      fail(t, "unknown type '" + t.text + "'");
    }
    if (t.kind != Token::Open) fail(t, "expected a type");
    Token head = atom();
    Viewtype out;
    if (head.text == "int") {
      Token n = atom();
      auto v = as_int(n.text);
      if (!v) fail(n, "expected integer index");
      out = Viewtype::int_exact(*v);
    } else if (head.text == "prod" || head.text == "tensor" || head.text == "->" ||
               head.text == "-o") {
      Viewtype a = type();
      Viewtype b = type();
      if (head.text == "prod") out = Viewtype::prod(a, b);
      else if (head.text == "tensor") out = Viewtype::tensor(a, b);
      else out = Viewtype::arrow(head.text == "-o" ? ArrowKind::Linear : ArrowKind::Intuitionistic, a, b);
    } else if (head.text == "chan") {
      Token g = atom();
      RoleSet group;
      try {
        group = parse_role_set(g.text);
      } catch (const SyntaxError& e) {
        throw SyntaxError(g.pos + e.position(), "bad role set");
      }
      Token s = take();
      if (s.kind != Token::String) fail(s, "expected quoted session type");
      SessionType proto;
      try {
        proto = parse_session(s.text);
      } catch (const SyntaxError& e) {
        throw SyntaxError(s.pos + 1 + e.position(), std::string("in session type: ") + e.what());
      }
      out = Viewtype::chan(group, proto);
    } else {
      fail(head, "unknown type former '" + head.text + "'");
    }
    close();
    return out;
  }

  Expr expr() {
    Token t = take();
    if (t.kind == Token::String) return Expr::str(t.text);
    if (t.kind == Token::Atom) {
      if (t.text == "unit") return Expr::unit();
      if (t.text == "true") return Expr::boolean(true);
      if (t.text == "false") return Expr::boolean(false);
      if (auto v = as_int(t.text)) return Expr::integer(*v);
      if (auto h = as_res(t.text)) return Expr::res(*h);
      if (!is_ident(t.text)) fail(t, "bad atom '" + t.text + "'");
      auto it = scope_.find(t.text);
      bool fix = it != scope_.end() && it->second.back();
      return fix ? Expr::fix_var(t.text) : Expr::var(t.text);
    }
    if (t.kind != Token::Open) fail(t, "expected an expression");
    Token head = atom();
    const std::string& h = head.text;
    Expr out = Expr::unit();
    if (h == "pair") {
      Expr a = expr();
      Expr b = expr();
      out = Expr::pair(a, b);
    } else if (h == "fst" || h == "snd") {
      Expr e = expr();
      out = h == "fst" ? Expr::fst(e) : Expr::snd(e);
    } else if (h == "letp") {
      open();
      std::string x1 = ident(), x2 = ident();
      close();
      Expr bound = expr();
      push(x1, false);
      push(x2, false);
      Expr body = expr();
      pop(x2);
      pop(x1);
      out = Expr::let_pair(x1, x2, bound, body);
    } else if (h == "lam") {
      std::optional<ArrowKind> kind;
      if (cur_.kind == Token::Atom && (cur_.text == ":i" || cur_.text == ":l")) {
        kind = cur_.text == ":l" ? ArrowKind::Linear : ArrowKind::Intuitionistic;
        advance();
      }
      open();
      std::string x = ident();
      Viewtype t1 = type();
      close();
      push(x, false);
      Expr body = expr();
      pop(x);
      out = Expr::lam(x, t1, kind, body);
    } else if (h == "let") {
      open();
      std::string x = ident();
      Viewtype t1 = type();
      close();
      Expr bound = expr();
      push(x, false);
      Expr body = expr();
      pop(x);
      out = Expr::let(x, t1, bound, body);
    } else if (h == "app") {
      Expr f = expr();
      Expr a = expr();
      out = Expr::app(f, a);
    } else if (h == "fix") {
      open();
      std::string f = ident();
      Viewtype t1 = type();
      close();
      push(f, true);
      Expr body = expr();
      pop(f);
      out = Expr::fix(f, t1, body);
    } else if (h == "if") {
      Expr c = expr();
      Expr a = expr();
      Expr b = expr();
      out = Expr::if_(c, a, b);
    } else if (auto op = prim(h)) {
      std::vector<Expr> args;
      while (cur_.kind != Token::Close && cur_.kind != Token::End) args.push_back(expr());
      if (args.size() != prim_arity(*op)) {
        fail(head, std::string(prim_name(*op)) + " takes " + std::to_string(prim_arity(*op)) +
                       " argument(s)");
      }
      out = Expr::prim(*op, std::move(args));
    } else {
      fail(head, "unknown form '" + h + "'");
    }
    close();
    return out;
  }

  Pool pool() {
    Pool p;
    open();
    Token head = atom();
    if (head.text != "pool") fail(head, "expected (pool ...)");
    bool have_nrole = false;
    std::uint64_t max_chan = 0;
    while (cur_.kind == Token::Open) {
      advance();
      Token kw = atom();
      if (kw.text == "nrole") {
        Token n = atom();
        auto v = as_int(n.text);
        if (!v) fail(n, "expected role count");
        p.universe = RoleUniverse(static_cast<int>(*v));
        have_nrole = true;
      } else if (kw.text == "res") {
        Token r = atom();
        auto h = as_res(r.text);
        if (!h) fail(r, "expected a resource constant");
        p.sigma.insert_or_assign(*h, type());
        max_chan = std::max(max_chan, h->id);
      } else if (kw.text == "thread") {
        Token n = atom();
        auto v = as_int(n.text);
        if (!v || *v < 0) fail(n, "expected thread id");
        if (p.threads.count(static_cast<std::uint64_t>(*v))) fail(n, "duplicate thread id");
        p.threads.insert_or_assign(static_cast<std::uint64_t>(*v), expr());
        p.next_tid = std::max<std::uint64_t>(p.next_tid, static_cast<std::uint64_t>(*v) + 1);
      } else {
        fail(kw, "unknown pool clause '" + kw.text + "'");
      }
      close();
    }
    close();
    end();
    if (!have_nrole) p.universe = RoleUniverse();
    for (const auto& [tid, e] : p.threads) {
      for (const auto& h : rho(e)) max_chan = std::max(max_chan, h.id);
    }
    p.next_chan = max_chan + 1;
    return p;
  }

  void end() {
    if (cur_.kind != Token::End) fail(cur_, "trailing input");
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) { throw SyntaxError(t.pos, msg); }

  void advance() { cur_ = lex_.next(); }

  Token take() {
    Token t = cur_;
    if (t.kind == Token::End) fail(t, "unexpected end of input");
    advance();
    return t;
  }

  Token atom() {
    Token t = take();
    if (t.kind != Token::Atom) fail(t, "expected an atom");
    return t;
  }

  std::string ident() {
    Token t = atom();
    if (!is_ident(t.text)) fail(t, "expected an identifier, got '" + t.text + "'");
    return t.text;
  }

  void open() {
    Token t = take();
    if (t.kind != Token::Open) fail(t, "expected '('");
  }

  void close() {
    Token t = take();
    if (t.kind != Token::Close) fail(t, "expected ')'");
  }

  static std::optional<PrimOp> prim(const std::string& s) {
    for (PrimOp op : {PrimOp::IAdd, PrimOp::RandBit, PrimOp::ThreadCreate, PrimOp::ChanCreate,
                      PrimOp::Chan2Create, PrimOp::Send, PrimOp::Recv, PrimOp::Skip,
                      PrimOp::Close}) {
      if (prim_name(op) == s) return op;
    }
    return std::nullopt;
  }

  void push(const std::string& x, bool fix) { scope_[x].push_back(fix); }
  void pop(const std::string& x) {
    auto it = scope_.find(x);
    it->second.pop_back();
    if (it->second.empty()) scope_.erase(it);
  }

  Lexer lex_;
  Token cur_{Token::End, "", 0};
  std::map<std::string, std::vector<bool>> scope_;
};

}  // namespace

Viewtype parse_type(std::string_view text) {
  Parser p(text);
  Viewtype t = p.type();
  p.end();
  return t;
}

Expr parse_expr(std::string_view text) {
  Parser p(text);
  Expr e = p.expr();
  p.end();
  return e;
}

Pool parse_pool(std::string_view text) { return Parser(text).pool(); }

}  // namespace mrsession::calc

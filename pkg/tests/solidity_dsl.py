"""
solidity_dsl - Builds solc compact-JSON ASTs so detector tests run without a compiler.

Every node gets its own line in a synthetic source text, so source ranges,
line numbers and the text under inline-assembly nodes all behave as they do
for real compiler output.

    ast = SolAst()
    x = ast.var("x", "uint256", state=True)
    fn = ast.function("set", params=[p := ast.param("v", "uint256")],
                      body=[ast.expr_stmt(ast.assign(ast.ident(x), ast.ident(p)))])
    artifact = ast.artifact(ast.contract("C", [x, fn]))
"""

import hashlib
import itertools
from typing import Any, Dict, List, Optional, Sequence

from equiv_guard.ingest.ast import normalize_ast
from equiv_guard.ingest.models import CompilationArtifact, SourceUnit

Json = Dict[str, Any]

# solc gives global names negative declaration ids
BUILTINS = {
    "abi": -1, "block": -4, "ecrecover": -6, "gasleft": -7, "keccak256": -8,
    "msg": -15, "require": -18, "assert": -3, "revert": -19, "this": -28,
    "selfdestruct": -21, "tx": -26, "now": -17,
}

BUILTIN_TYPES = {
    "abi": "abi", "block": "block", "msg": "msg", "tx": "tx",
    "ecrecover": "function (bytes32,uint8,bytes32,bytes32) pure returns (address)",
    "gasleft": "function () view returns (uint256)",
    "keccak256": "function (bytes memory) pure returns (bytes32)",
    "require": "function (bool) pure",
    "assert": "function (bool) pure",
    "revert": "function () pure",
}


class SolAst:
    """Node factory for one synthetic source file."""

    def __init__(self, path: str = "Fixture.sol"):
        self.path = path
        self._ids = itertools.count(1)
        self._lines: List[str] = []
        self._offset = 0

    # --- Plumbing ---

    def _src(self, text: str) -> str:
        size = len(text.encode("utf-8"))
        start = self._offset
        self._lines.append(text)
        self._offset += size + 1
        return f"{start}:{size}:0"

    def node(self, node_type: str, text: Optional[str] = None, type_string: Optional[str] = None,
             **fields: Any) -> Json:
        out: Json = {"nodeType": node_type, "id": next(self._ids), "src": self._src(text or node_type)}
        if type_string is not None:
            out["typeDescriptions"] = {"typeString": type_string}
        out.update(fields)
        return out

    @property
    def text(self) -> str:
        return "\n".join(self._lines) + "\n"

    # --- Declarations ---

    def var(self, name: str, type_string: str, value: Optional[Json] = None, state: bool = True,
            mutability: str = "mutable", visibility: str = "internal") -> Json:
        return self.node("VariableDeclaration", f"{type_string} {name}", type_string, name=name,
                         stateVariable=state, constant=mutability == "constant", mutability=mutability,
                         visibility=visibility, value=value)

    def param(self, name: str, type_string: str) -> Json:
        return self.var(name, type_string, state=False, visibility="internal")

    def params(self, decls: Sequence[Json]) -> Json:
        return self.node("ParameterList", parameters=list(decls))

    def function(self, name: str, params: Sequence[Json] = (), body: Optional[Sequence[Json]] = (),
                 returns: Sequence[Json] = (), visibility: str = "public", mutability: str = "nonpayable",
                 kind: str = "function", modifiers: Sequence[Json] = (), selector: Optional[str] = None) -> Json:
        return self.node(
            "FunctionDefinition", f"function {name}", name="" if kind != "function" else name, kind=kind,
            visibility=visibility, stateMutability=mutability, implemented=body is not None,
            functionSelector=selector, parameters=self.params(params), returnParameters=self.params(returns),
            modifiers=list(modifiers), body=self.block(body) if body is not None else None)

    def constructor(self, params: Sequence[Json] = (), body: Sequence[Json] = ()) -> Json:
        return self.function("constructor", params=params, body=body, kind="constructor")

    def modifier(self, name: str, body: Sequence[Json], params: Sequence[Json] = ()) -> Json:
        return self.node("ModifierDefinition", f"modifier {name}", name=name, parameters=self.params(params),
                         body=self.block(body))

    def use_modifier(self, definition: Json, *args: Json) -> Json:
        return self.node("ModifierInvocation", definition["name"],
                         modifierName={"name": definition["name"], "referencedDeclaration": definition["id"]},
                         arguments=list(args))

    def contract(self, name: str, members: Sequence[Json], kind: str = "contract",
                 bases: Sequence[Json] = ()) -> Json:
        node = self.node("ContractDefinition", f"{kind} {name}", name=name, contractKind=kind,
                         abstract=False, nodes=list(members))
        node["linearizedBaseContracts"] = [node["id"]] + [b["id"] for b in bases]
        return node

    def unit(self, *members: Json) -> Json:
        return self.node("SourceUnit", absolutePath=self.path, nodes=list(members))

    # --- Expressions ---

    def ident(self, target: Any, type_string: Optional[str] = None) -> Json:
        if isinstance(target, dict):
            declared = (target.get("typeDescriptions") or {}).get("typeString", "")
            return self.node("Identifier", target["name"], type_string or declared, name=target["name"],
                             referencedDeclaration=target["id"])
        return self.node("Identifier", target, type_string or BUILTIN_TYPES.get(target, ""), name=target,
                         referencedDeclaration=BUILTINS.get(target))

    def member(self, base: Json, name: str, type_string: str = "", ref: Optional[int] = None) -> Json:
        return self.node("MemberAccess", f".{name}", type_string, memberName=name, expression=base,
                         referencedDeclaration=ref)

    def env(self, base: str, name: str, type_string: str = "uint256") -> Json:
        """`block.number`, `msg.sender` and friends."""
        return self.member(self.ident(base), name, type_string)

    def index(self, base: Json, key: Json, type_string: str = "uint256") -> Json:
        return self.node("IndexAccess", "[]", type_string, baseExpression=base, indexExpression=key)

    def number(self, value: Any, type_string: Optional[str] = None, unit: Optional[str] = None) -> Json:
        text = str(value)
        return self.node("Literal", text, type_string or f"int_const {text}", kind="number", value=text,
                         subdenomination=unit)

    def address(self, hex_text: str) -> Json:
        return self.node("Literal", hex_text, "address", kind="number", value=hex_text)

    def string(self, text: str) -> Json:
        return self.node("Literal", f'"{text}"', f'literal_string "{text}"', kind="string", value=text)

    def boolean(self, value: bool) -> Json:
        text = "true" if value else "false"
        return self.node("Literal", text, "bool", kind="bool", value=text)

    def binop(self, left: Json, op: str, right: Json, type_string: str = "bool") -> Json:
        return self.node("BinaryOperation", op, type_string, operator=op, leftExpression=left,
                         rightExpression=right)

    def unary(self, op: str, operand: Json, prefix: bool = False, type_string: str = "uint256") -> Json:
        return self.node("UnaryOperation", op, type_string, operator=op, prefix=prefix, subExpression=operand)

    def assign(self, lhs: Json, rhs: Json, op: str = "=") -> Json:
        return self.node("Assignment", op, (lhs.get("typeDescriptions") or {}).get("typeString", ""),
                         operator=op, leftHandSide=lhs, rightHandSide=rhs)

    def call(self, callee: Json, *args: Json, type_string: str = "", kind: str = "functionCall") -> Json:
        return self.node("FunctionCall", "()", type_string, kind=kind, expression=callee, arguments=list(args))

    def builtin(self, name: str, *args: Json, type_string: str = "") -> Json:
        """Call of a global function such as `keccak256` or `gasleft`."""
        return self.call(self.ident(name), *args, type_string=type_string)

    def abi_encode(self, *args: Json, packed: bool = False) -> Json:
        member = "encodePacked" if packed else "encode"
        return self.call(self.member(self.ident("abi"), member, "function () pure returns (bytes memory)"),
                         *args, type_string="bytes memory")

    def keccak(self, *args: Json) -> Json:
        return self.builtin("keccak256", *args, type_string="bytes32")

    def to_address(self, arg: Json, payable: bool = False) -> Json:
        type_string = "address payable" if payable else "address"
        type_name = self.node("ElementaryTypeNameExpression", "payable" if payable else "address",
                              f"type({type_string})", typeName={"name": "address"})
        return self.call(type_name, arg, type_string=type_string, kind="typeConversion")

    def to_contract(self, interface: Json, arg: Json) -> Json:
        name = interface["name"]
        callee = self.node("Identifier", name, f"type(contract {name})", name=name,
                           referencedDeclaration=interface["id"])
        return self.call(callee, arg, type_string=f"contract {name}", kind="typeConversion")

    def method(self, base: Json, name: str, *args: Json, type_string: str = "",
               value: Optional[Json] = None) -> Json:
        """`base.name{value: value}(args)`."""
        callee = self.member(base, name, f"function () payable external")
        if value is not None:
            callee = self.node("FunctionCallOptions", "{value}", names=["value"], options=[value],
                               expression=callee)
        return self.call(callee, *args, type_string=type_string)

    def tuple(self, *components: Json) -> Json:
        return self.node("TupleExpression", "()", components=list(components))

    # --- Statements ---

    def block(self, stmts: Sequence[Json]) -> Json:
        return self.node("Block", "{}", statements=list(stmts))

    def expr_stmt(self, expr: Json) -> Json:
        return self.node("ExpressionStatement", ";", expression=expr)

    def let(self, decl: Json, init: Optional[Json] = None) -> Json:
        return self.node("VariableDeclarationStatement", f"{decl['name']} =", declarations=[decl],
                         initialValue=init)

    def local(self, name: str, type_string: str) -> Json:
        return self.var(name, type_string, state=False, visibility="internal")

    def require(self, cond: Json, message: Optional[str] = None) -> Json:
        args = [cond] + ([self.string(message)] if message is not None else [])
        return self.expr_stmt(self.builtin("require", *args))

    def if_(self, cond: Json, then: Sequence[Json], otherwise: Optional[Sequence[Json]] = None) -> Json:
        return self.node("IfStatement", "if", condition=cond, trueBody=self.block(then),
                         falseBody=self.block(otherwise) if otherwise is not None else None)

    def while_(self, cond: Json, body: Sequence[Json]) -> Json:
        return self.node("WhileStatement", "while", condition=cond, body=self.block(body))

    def for_(self, init: Optional[Json], cond: Optional[Json], step: Optional[Json], body: Sequence[Json]) -> Json:
        return self.node("ForStatement", "for", initializationExpression=init, condition=cond,
                         loopExpression=step, body=self.block(body))

    def ret(self, value: Optional[Json] = None) -> Json:
        return self.node("Return", "return", expression=value)

    def emit(self, event: Json, *args: Json) -> Json:
        return self.node("EmitStatement", "emit", eventCall=self.call(self.ident(event), *args))

    def event(self, name: str) -> Json:
        return self.node("EventDefinition", f"event {name}", name=name)

    def placeholder(self) -> Json:
        return self.node("PlaceholderStatement", "_;")

    def assembly(self, text: str) -> Json:
        return self.node("InlineAssembly", text)

    # --- Artifacts ---

    def artifact(self, contract: Json, *others: Json) -> CompilationArtifact:
        """Normalize a unit holding `contract` (and `others`) into an artifact for `contract`."""
        unit = normalize_ast(self.unit(*others, contract))
        root = next(c for c in unit.children_with("member") if c.node_id == contract["id"])
        content = self.text
        source = SourceUnit(id=hashlib.sha256(content.encode("utf-8")).hexdigest(), path=self.path,
                            content=content, declared_pragma="^0.8.0")
        return CompilationArtifact(contract_name=contract["name"], source_path=self.path, ast_root=root,
                                   ast_units=[unit], sources={0: source})

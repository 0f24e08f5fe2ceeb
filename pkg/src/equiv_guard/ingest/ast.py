"""
ingest.ast - Normalization of the solc compact JSON AST into `AstNode` trees.

Each solc `nodeType` maps to an `AstKind`; the fields the analyses need are
copied into snake_case attributes and child nodes are tagged with their role.
Calls to `require`/`assert` become REQUIRE nodes. Inline assembly is kept as an
opaque leaf.
"""

import logging
from decimal import Decimal, InvalidOperation
from typing import Any, Callable, Dict, List, Optional

from eth_utils import to_checksum_address

from equiv_guard.ingest.models import AstKind, AstNode
from equiv_guard.models import SourceRange

logger = logging.getLogger(__name__)

SUBDENOMINATIONS = {
    "wei": 1,
    "gwei": 10**9,
    "szabo": 10**12,
    "finney": 10**15,
    "ether": 10**18,
    "seconds": 1,
    "minutes": 60,
    "hours": 3600,
    "days": 86400,
    "weeks": 604800,
    "years": 31536000,
}

NODE_KINDS: Dict[str, AstKind] = {
    "SourceUnit": AstKind.SOURCE_UNIT,
    "ContractDefinition": AstKind.CONTRACT,
    "FunctionDefinition": AstKind.FUNCTION,
    "ModifierDefinition": AstKind.MODIFIER,
    "ModifierInvocation": AstKind.MODIFIER_INVOCATION,
    "VariableDeclaration": AstKind.VARIABLE,
    "VariableDeclarationStatement": AstKind.VARIABLE_STATEMENT,
    "ParameterList": AstKind.PARAMETER_LIST,
    "Block": AstKind.BLOCK,
    "UncheckedBlock": AstKind.BLOCK,
    "ExpressionStatement": AstKind.EXPRESSION_STATEMENT,
    "Assignment": AstKind.ASSIGNMENT,
    "BinaryOperation": AstKind.BINARY,
    "UnaryOperation": AstKind.UNARY,
    "FunctionCall": AstKind.FUNCTION_CALL,
    "FunctionCallOptions": AstKind.CALL_OPTIONS,
    "MemberAccess": AstKind.MEMBER_ACCESS,
    "IndexAccess": AstKind.INDEX_ACCESS,
    "Identifier": AstKind.IDENTIFIER,
    "IdentifierPath": AstKind.IDENTIFIER,
    "Literal": AstKind.LITERAL,
    "Conditional": AstKind.CONDITIONAL,
    "TupleExpression": AstKind.TUPLE,
    "ElementaryTypeNameExpression": AstKind.TYPE_NAME,
    "NewExpression": AstKind.NEW,
    "IfStatement": AstKind.IF,
    "WhileStatement": AstKind.WHILE,
    "DoWhileStatement": AstKind.DO_WHILE,
    "ForStatement": AstKind.FOR,
    "Return": AstKind.RETURN,
    "EmitStatement": AstKind.EMIT,
    "RevertStatement": AstKind.REVERT,
    "PlaceholderStatement": AstKind.PLACEHOLDER,
    "InlineAssembly": AstKind.INLINE_ASSEMBLY,
    "Break": AstKind.BREAK,
    "Continue": AstKind.CONTINUE,
    "Throw": AstKind.REVERT,
    "EventDefinition": AstKind.EVENT,
    "StructDefinition": AstKind.STRUCT,
}

# nodeType -> list of (json key, role); list-valued keys produce one child per item
CHILD_SLOTS: Dict[str, List[tuple]] = {
    "SourceUnit": [("nodes", "member")],
    "ContractDefinition": [("nodes", "member")],
    "FunctionDefinition": [
        ("parameters", "params"), ("returnParameters", "returns"),
        ("modifiers", "modifier"), ("body", "body"),
    ],
    "ModifierDefinition": [("parameters", "params"), ("body", "body")],
    "ModifierInvocation": [("arguments", "arg")],
    "VariableDeclaration": [("value", "init")],
    "VariableDeclarationStatement": [("declarations", "decl"), ("initialValue", "init")],
    "ParameterList": [("parameters", "param")],
    "Block": [("statements", "stmt")],
    "UncheckedBlock": [("statements", "stmt")],
    "ExpressionStatement": [("expression", "expr")],
    "Assignment": [("leftHandSide", "lhs"), ("rightHandSide", "rhs")],
    "BinaryOperation": [("leftExpression", "left"), ("rightExpression", "right")],
    "UnaryOperation": [("subExpression", "operand")],
    "FunctionCall": [("expression", "callee"), ("arguments", "arg")],
    "FunctionCallOptions": [("expression", "callee"), ("options", "option")],
    "MemberAccess": [("expression", "base")],
    "IndexAccess": [("baseExpression", "base"), ("indexExpression", "index")],
    "Conditional": [("condition", "condition"), ("trueExpression", "then"), ("falseExpression", "else")],
    "TupleExpression": [("components", "component")],
    "IfStatement": [("condition", "condition"), ("trueBody", "then"), ("falseBody", "else")],
    "WhileStatement": [("condition", "condition"), ("body", "body")],
    "DoWhileStatement": [("condition", "condition"), ("body", "body")],
    "ForStatement": [
        ("initializationExpression", "init"), ("condition", "condition"),
        ("loopExpression", "step"), ("body", "body"),
    ],
    "Return": [("expression", "value")],
    "EmitStatement": [("eventCall", "expr")],
    "RevertStatement": [("errorCall", "expr")],
}

REQUIRE_NAMES = frozenset({"require", "assert"})


def normalize_literal(kind: str, value: Optional[str], type_string: str,
                      subdenomination: Optional[str] = None) -> Dict[str, Any]:
    """Normalize a solc literal.

    Integers become decimal strings (with `int_value` set), address literals
    become checksummed hex. Strings and booleans pass through.

    Args:
        kind: solc literal kind ("number", "string", "bool", "hexString", ...).
        value: Literal text as written in source.
        type_string: solc type string of the literal.
        subdenomination: Optional unit suffix (ether, days, ...).

    Returns:
        Attribute map with `literal_kind`, `value`, `int_value` and `is_address`.
    """
    attrs: Dict[str, Any] = {"literal_kind": kind, "value": value, "int_value": None, "is_address": False}
    if kind == "bool":
        attrs["int_value"] = 1 if value == "true" else 0
        return attrs
    if kind != "number" or value is None:
        return attrs
    text = value.replace("_", "")
    try:
        if text.lower().startswith("0x"):
            number = int(text, 16)
        else:
            number = int(Decimal(text))
    except (ValueError, InvalidOperation):
        logger.debug("unparsable number literal %r", value)
        return attrs
    number *= SUBDENOMINATIONS.get(subdenomination or "", 1)
    attrs["int_value"] = number
    if type_string.startswith("address") or (text.lower().startswith("0x") and len(text) == 42):
        attrs["is_address"] = True
        attrs["value"] = to_checksum_address(number.to_bytes(20, "big"))
    else:
        attrs["value"] = str(number)
    return attrs


def _type_string(node: Dict[str, Any]) -> str:
    return (node.get("typeDescriptions") or {}).get("typeString") or ""


def _attributes(node: Dict[str, Any]) -> Dict[str, Any]:
    node_type = node.get("nodeType")
    attrs: Dict[str, Any] = {"type_string": _type_string(node)}

    if node_type == "ContractDefinition":
        attrs.update(
            name=node.get("name"),
            contract_kind=node.get("contractKind", "contract"),
            abstract=bool(node.get("abstract", False)),
            linearized_base_contracts=list(node.get("linearizedBaseContracts") or []),
        )
    elif node_type == "FunctionDefinition":
        kind = node.get("kind") or ("constructor" if node.get("isConstructor") else "function")
        attrs.update(
            name=node.get("name") or kind,
            function_kind=kind,
            visibility=node.get("visibility", "public"),
            mutability=node.get("stateMutability", "nonpayable"),
            implemented=bool(node.get("implemented", True)),
            function_selector=node.get("functionSelector"),
            virtual=bool(node.get("virtual", False)),
            base_functions=list(node.get("baseFunctions") or []),
        )
    elif node_type == "ModifierDefinition":
        attrs.update(name=node.get("name"))
    elif node_type == "ModifierInvocation":
        target = node.get("modifierName") or {}
        attrs.update(name=target.get("name"), referenced_declaration=target.get("referencedDeclaration"))
    elif node_type == "VariableDeclaration":
        attrs.update(
            name=node.get("name"),
            state_variable=bool(node.get("stateVariable", False)),
            constant=bool(node.get("constant", False)),
            mutability=node.get("mutability") or ("constant" if node.get("constant") else "mutable"),
            visibility=node.get("visibility", "internal"),
            scope=node.get("scope"),
        )
    elif node_type in ("Assignment", "BinaryOperation", "UnaryOperation"):
        attrs.update(operator=node.get("operator"), prefix=node.get("prefix"))
    elif node_type in ("FunctionCall", "FunctionCallOptions"):
        attrs.update(call_kind=node.get("kind", "functionCall"), names=list(node.get("names") or []))
    elif node_type == "MemberAccess":
        attrs.update(member_name=node.get("memberName"), referenced_declaration=node.get("referencedDeclaration"))
    elif node_type in ("Identifier", "IdentifierPath"):
        attrs.update(name=node.get("name"), referenced_declaration=node.get("referencedDeclaration"))
    elif node_type == "Literal":
        attrs.update(normalize_literal(node.get("kind", ""), node.get("value"), attrs["type_string"],
                                       node.get("subdenomination")))
    elif node_type == "ElementaryTypeNameExpression":
        type_name = node.get("typeName")
        attrs.update(name=type_name.get("name") if isinstance(type_name, dict) else type_name)
    elif node_type in ("EventDefinition", "StructDefinition"):
        attrs.update(name=node.get("name"))
    elif node_type == "SourceUnit":
        attrs.update(absolute_path=node.get("absolutePath"))
    return attrs


def normalize_ast(node: Dict[str, Any], role: Optional[str] = None,
                  on_unknown: Optional[Callable[[str], None]] = None) -> AstNode:
    """Convert one solc JSON AST node (recursively) into an `AstNode`.

    Args:
        node: A solc compact-format AST node.
        role: Slot the node occupies in its parent.
        on_unknown: Called with the nodeType of unmapped nodes.

    Returns:
        The normalized tree.
    """
    node_type = node.get("nodeType", "")
    kind = NODE_KINDS.get(node_type, AstKind.OTHER)
    if kind == AstKind.OTHER and on_unknown is not None:
        on_unknown(node_type)

    children: List[AstNode] = []
    if kind != AstKind.INLINE_ASSEMBLY:
        for key, child_role in CHILD_SLOTS.get(node_type, []):
            value = node.get(key)
            if value is None:
                continue
            items = value if isinstance(value, list) else [value]
            for item in items:
                if isinstance(item, dict) and "nodeType" in item:
                    children.append(normalize_ast(item, child_role, on_unknown))

    attrs = _attributes(node)
    if kind == AstKind.FUNCTION_CALL and children:
        callee = children[0]
        if callee.kind == AstKind.IDENTIFIER and callee.name in REQUIRE_NAMES:
            kind = AstKind.REQUIRE
            attrs["name"] = callee.name
    attrs["node_type"] = node_type

    return AstNode(
        kind=kind,
        node_id=int(node.get("id", -1)),
        src=SourceRange.parse(node.get("src", "0:0:-1")),
        role=role,
        children=children,
        attributes=attrs,
    )

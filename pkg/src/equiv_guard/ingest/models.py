"""
ingest.models - Normalized compiler and explorer records.

`AstNode` is a compact, uniform view of the solc JSON AST: every node has a
kind, the solc node id, its source range, ordered children tagged with the
role they play in the parent (e.g. `condition`, `body`, `lhs`) and a map of
snake_case attributes. Downstream phases read only this view.
"""

from enum import Enum
from typing import Any, Dict, Iterator, List, Optional

from eth_utils import to_checksum_address
from pydantic import BaseModel, ConfigDict, Field, field_validator

from equiv_guard.models import SourceRange


# --- Source text ---

class SourceUnit(BaseModel):
    """One Solidity file as handed to the compiler."""
    model_config = ConfigDict(frozen=True)

    id: str = Field(description="Opaque identifier, usually the sha256 of the content")
    path: str = Field(description="Path relative to the compilation root")
    content: str = Field(description="UTF-8 Solidity text")
    declared_pragma: Optional[str] = Field(default=None, description="Semver range from `pragma solidity`")

    @field_validator("content")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("source content is empty")
        return value


# --- AST ---

class AstKind(str, Enum):
    """Node kinds the analyses distinguish. Anything else becomes OTHER."""
    SOURCE_UNIT = "SourceUnit"
    CONTRACT = "ContractDef"
    FUNCTION = "FunctionDef"
    MODIFIER = "ModifierDef"
    MODIFIER_INVOCATION = "ModifierInvocation"
    VARIABLE = "VariableDecl"
    VARIABLE_STATEMENT = "VariableDeclStmt"
    PARAMETER_LIST = "ParameterList"
    BLOCK = "Block"
    EXPRESSION_STATEMENT = "ExpressionStmt"
    ASSIGNMENT = "Assignment"
    BINARY = "BinaryOp"
    UNARY = "UnaryOp"
    FUNCTION_CALL = "FunctionCall"
    CALL_OPTIONS = "CallOptions"
    REQUIRE = "Require"
    MEMBER_ACCESS = "MemberAccess"
    INDEX_ACCESS = "IndexAccess"
    IDENTIFIER = "Identifier"
    LITERAL = "Literal"
    CONDITIONAL = "Conditional"
    TUPLE = "Tuple"
    TYPE_NAME = "TypeName"
    NEW = "New"
    IF = "If"
    WHILE = "While"
    DO_WHILE = "DoWhile"
    FOR = "For"
    RETURN = "Return"
    EMIT = "Emit"
    REVERT = "Revert"
    PLACEHOLDER = "Placeholder"
    INLINE_ASSEMBLY = "InlineAssembly"
    BREAK = "Break"
    CONTINUE = "Continue"
    EVENT = "EventDef"
    STRUCT = "StructDef"
    OTHER = "Other"


LOOP_KINDS = frozenset({AstKind.WHILE, AstKind.DO_WHILE, AstKind.FOR})


class AstNode(BaseModel):
    """A normalized AST node."""

    kind: AstKind
    node_id: int = Field(description="solc node id, unique within one compiler run")
    src: SourceRange
    role: Optional[str] = Field(default=None, description="Slot this node occupies in its parent")
    children: List["AstNode"] = Field(default_factory=list)
    attributes: Dict[str, Any] = Field(default_factory=dict)

    # --- Accessors ---

    def attr(self, key: str, default: Any = None) -> Any:
        return self.attributes.get(key, default)

    @property
    def name(self) -> Optional[str]:
        return self.attributes.get("name")

    def child(self, role: str) -> Optional["AstNode"]:
        for c in self.children:
            if c.role == role:
                return c
        return None

    def children_with(self, role: str) -> List["AstNode"]:
        return [c for c in self.children if c.role == role]

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal including self."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def find(self, kind: AstKind) -> Iterator["AstNode"]:
        return (n for n in self.walk() if n.kind == kind)

    @property
    def opaque(self) -> bool:
        return self.kind == AstKind.INLINE_ASSEMBLY


AstNode.model_rebuild()


# --- Compiler outputs ---

class SourceMapEntry(BaseModel):
    """Source range for one bytecode instruction (by instruction index)."""
    model_config = ConfigDict(frozen=True)

    range: SourceRange
    jump: str = Field(default="-", description="'i' into a function, 'o' out of one, '-' regular")

    @property
    def generated(self) -> bool:
        return self.range.generated


class AbiFunction(BaseModel):
    """An ABI function entry with its 4-byte selector."""
    model_config = ConfigDict(frozen=True)

    name: str
    signature: str = Field(description="Canonical signature, e.g. 'transfer(address,uint256)'")
    selector: str = Field(description="0x-prefixed 4-byte selector")
    state_mutability: str = "nonpayable"


class StorageSlot(BaseModel):
    """One entry of the compiler's storage layout."""
    model_config = ConfigDict(frozen=True)

    label: str
    contract: str
    slot: int
    offset: int = 0
    type_label: str = ""


class CompilerSettings(BaseModel):
    """Settings a compilation ran with; recorded in every report."""
    model_config = ConfigDict(frozen=True)

    version: str = ""
    optimizer: bool = False
    runs: int = 200
    evm_version: Optional[str] = None


class CompilationArtifact(BaseModel):
    """One compiled concrete contract."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    contract_name: str
    source_path: str = Field(description="File that declares the contract")
    ast_root: AstNode = Field(description="The contract's definition node")
    ast_units: List[AstNode] = Field(default_factory=list, description="Every source unit of the run")
    sources: Dict[int, SourceUnit] = Field(default_factory=dict, description="solc source index to unit")
    deployed_bytecode: bytes = b""
    source_map: List[SourceMapEntry] = Field(default_factory=list)
    abi: List[AbiFunction] = Field(default_factory=list)
    storage_layout: List[StorageSlot] = Field(default_factory=list)
    compiler_version: str = ""
    settings: CompilerSettings = Field(default_factory=CompilerSettings)

    def path_of(self, file_index: int) -> str:
        unit = self.sources.get(file_index)
        return unit.path if unit else self.source_path

    def line_col(self, rng: SourceRange) -> tuple:
        """1-based (line, column) of the start of `rng`."""
        unit = self.sources.get(rng.file_index)
        if unit is None:
            return (1, 1)
        prefix = unit.content.encode("utf-8")[: rng.start].decode("utf-8", errors="ignore")
        line = prefix.count("\n") + 1
        column = len(prefix) - (prefix.rfind("\n") + 1) + 1
        return (line, column)

    @property
    def selectors(self) -> List[str]:
        return [f.selector for f in self.abi]


# --- Explorer ---

class Chain(str, Enum):
    """Chains with a built-in explorer endpoint; CUSTOM takes a base URL."""
    ETHEREUM = "ethereum"
    BSC = "bsc"
    POLYGON = "polygon"
    ARBITRUM = "arbitrum"
    OPTIMISM = "optimism"
    AVALANCHE = "avalanche"
    CUSTOM = "custom"


class ExplorerQuery(BaseModel):
    """Where to fetch a verified contract from."""
    model_config = ConfigDict(frozen=True)

    chain: Chain
    address: str = Field(description="20-byte address, stored checksummed")
    api_key: Optional[str] = Field(default=None, repr=False)
    base_url: Optional[str] = Field(default=None, description="Endpoint for Chain.CUSTOM")

    @field_validator("address")
    @classmethod
    def _checksum(cls, value: str) -> str:
        raw = value[2:] if value.lower().startswith("0x") else value
        if len(raw) != 40 or any(c not in "0123456789abcdefABCDEF" for c in raw):
            raise ValueError(f"not a 20-byte hex address: {value}")
        return to_checksum_address("0x" + raw.lower())


class VerifiedSource(BaseModel):
    """Source set plus settings published by an explorer."""

    contract_name: str
    sources: List[SourceUnit]
    compiler_version: str = Field(description="Bare semver, e.g. '0.8.17'")
    settings: CompilerSettings = Field(default_factory=CompilerSettings)

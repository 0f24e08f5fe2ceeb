"""Decompression of solc source maps (`s:l:f:j:m;...`)."""

from typing import List

from equiv_guard.ingest.models import SourceMapEntry
from equiv_guard.models import SourceRange


def decompress_source_map(text: str) -> List[SourceMapEntry]:
    """Expand a compressed source map into one entry per instruction.

    Empty fields repeat the previous entry's value; an empty entry repeats the
    whole previous entry. A file index of -1 marks compiler-generated code.
    """
    entries: List[SourceMapEntry] = []
    if not text:
        return entries
    start, length, file_index, jump = 0, 0, -1, "-"
    for item in text.split(";"):
        fields = item.split(":")
        if len(fields) > 0 and fields[0] != "":
            start = int(fields[0])
        if len(fields) > 1 and fields[1] != "":
            length = int(fields[1])
        if len(fields) > 2 and fields[2] != "":
            file_index = int(fields[2])
        if len(fields) > 3 and fields[3] != "":
            jump = fields[3]
        entries.append(SourceMapEntry(
            range=SourceRange(start=start, length=length, file_index=file_index),
            jump=jump,
        ))
    return entries


"""Kernel wrapping, tokenizing, two-pass parsing, pseudo expansion, encoding."""

import pytest

from rv32emu import isa
from rv32emu.assembler import (
    ERROR,
    INSTRUCTION,
    LABEL,
    PSEUDO,
    AssemblyError,
    AssemblyHasErrors,
    KernelConfig,
    MalformedOperand,
    ProgramItem,
    UndefinedLabel,
    UnknownDirective,
    assemble,
    expand_pseudo,
    parse,
    parse_int,
    process_directive,
    resolve_and_encode,
    split_hi_lo,
    tokenize,
    wrap_with_kernel,
)

CFG = KernelConfig()


def parse_user(source):
    wrap = wrap_with_kernel(source, CFG)
    return parse(wrap.source, wrap.kernel_lines, CFG)


def errors_of(items):
    return [it for it in items if it.kind == ERROR]


# ---------------------------------------------------------------- tokenizer

def test_tokenize_basic():
    assert tokenize("addi x1, x1, -1") == ["addi", "x1", "x1", "-1"]


def test_tokenize_offset_form():
    assert tokenize("lw x5, 8(x2)") == ["lw", "x5", "8", "x2"]
    assert tokenize("sw x5, -4(sp)") == ["sw", "x5", "-4", "sp"]


def test_tokenize_comment():
    assert tokenize("add x1, x2, x3 # add things") == ["add", "x1", "x2", "x3"]
    assert tokenize("# whole line") == []


def test_tokenize_label_colon():
    assert tokenize("loop: addi x1, x1, -1") == ["loop", ":", "addi", "x1", "x1", "-1"]
    assert tokenize("loop:addi x1, x1, 0") == ["loop", ":", "addi", "x1", "x1", "0"]


def test_tokenize_string_keeps_hash_and_commas():
    assert tokenize('.string "a#b, c"') == [".string", '"a#b, c"']


def test_parse_int_forms():
    assert parse_int("42") == 42
    assert parse_int("-7") == -7
    assert parse_int("0x10") == 16
    assert parse_int("-0x10") == -16
    assert parse_int("007") == 7
    assert parse_int("t0") is None
    assert parse_int("") is None


# ------------------------------------------------------------- kernel wrap

def test_wrap_marks_kernel_lines():
    wrap = wrap_with_kernel("addi x1, x0, 1\naddi x2, x0, 2\n", CFG)
    lines = wrap.source.splitlines()
    assert len(lines) == 7  # 2 prefix + 2 user + 3 suffix
    assert wrap.kernel_lines == frozenset({1, 2, 5, 6, 7})
    assert lines[0].startswith("li sp")
    assert lines[1].startswith("li gp")
    assert lines[-2] == "__exit:"
    assert lines[-1] == "j __exit"


def test_wrap_empty_program_runs_into_exit():
    prog = assemble("", CFG)
    # 4 prefix words then the self-jump
    assert [w for _, w, _ in prog.text_image][-1] == 0x0000006F
    assert prog.exit_address == CFG.text_base + 16
    assert prog.kernel_prefix_words == 4


def test_user_exit_label_is_reserved():
    items, _ = parse_user("__exit: nop\n")
    errs = errors_of(items)
    assert len(errs) == 1
    assert "reserved" in errs[0].error_message


# ------------------------------------------------------------------- parse

def test_parse_label_and_instruction_same_line():
    items, labels = parse_user("loop: addi x1, x1, -1\n")
    user = [it for it in items if not it.is_kernel]
    assert [it.kind for it in user] == [LABEL, INSTRUCTION]
    assert user[0].symbols == ["loop"]
    assert user[1].symbols == ["addi", "x1", "x1", "-1"]
    assert labels["loop"] == user[1].address


def test_parse_arity_error():
    items, _ = parse_user("addi x1\n")
    errs = errors_of(items)
    assert len(errs) == 1
    assert "expects 3 operand" in errs[0].error_message
    assert errs[0].address is None


def test_parse_collects_all_errors():
    items, _ = parse_user("addi x1\nnop\nfoo x1, x2\nadd x1, x2, 5\n")
    errs = errors_of(items)
    assert len(errs) == 3
    # combined numbering: user line n is line n + 2
    assert [e.line for e in errs] == [3, 5, 6]


def test_parse_line_numbers_are_combined_source():
    items, _ = parse_user("nop\n")
    user = [it for it in items if not it.is_kernel]
    assert user[0].line == 3


def test_parse_addresses_count_expansion_slots():
    items, _ = parse_user("li x5, 0x12345FFF\nnop\n")
    user = [it for it in items if not it.is_kernel and it.kind in (PSEUDO, INSTRUCTION)]
    li, nop = user
    assert li.size == 2
    assert nop.address == li.address + 8


def test_parse_unknown_register():
    items, _ = parse_user("add x1, q2, x3\n")
    assert "expected register" in errors_of(items)[0].error_message


def test_duplicate_label():
    items, _ = parse_user("a: nop\na: nop\n")
    errs = errors_of(items)
    assert len(errs) == 1
    assert "duplicate" in errs[0].error_message


def test_label_binds_to_next_instruction():
    items, labels = parse_user("nop\nhere:\nnop\n")
    user = [it for it in items if not it.is_kernel and it.kind == INSTRUCTION or
            (not it.is_kernel and it.kind == PSEUDO)]
    assert labels["here"] == user[1].address


def test_error_totality_every_nonblank_line_has_item():
    src = "nop\n\n# comment only\naddi x1, x0, 1\nbogus\n"
    items, _ = parse_user(src)
    wrap = wrap_with_kernel(src, CFG)
    n_lines = len(wrap.source.splitlines())
    covered = {it.line for it in items}
    for line_no, text in enumerate(wrap.source.splitlines(), start=1):
        stripped = text.split("#", 1)[0].strip()
        if stripped:
            assert line_no in covered, f"line {line_no} produced no item"
    assert len(covered) == n_lines - 2  # blank + comment-only lines yield nothing


# ------------------------------------------------------------------ pseudo

def _pseudo(symbols):
    return ProgramItem(symbols=symbols, kind=PSEUDO, line=1, address=0x100,
                       size=len(symbols))


def test_expand_nop():
    out = expand_pseudo(_pseudo(["nop"]))
    assert [it.symbols for it in out] == [["addi", "x0", "x0", "0"]]


def test_expand_mv_j_jr_ret_beqz_bnez():
    assert expand_pseudo(_pseudo(["mv", "x5", "x6"]))[0].symbols == ["addi", "x5", "x6", "0"]
    assert expand_pseudo(_pseudo(["j", "loop"]))[0].symbols == ["jal", "x0", "loop"]
    assert expand_pseudo(_pseudo(["jr", "x5"]))[0].symbols == ["jalr", "x0", "x5", "0"]
    assert expand_pseudo(_pseudo(["ret"]))[0].symbols == ["jalr", "x0", "ra", "0"]
    assert expand_pseudo(_pseudo(["beqz", "x5", "out"]))[0].symbols == ["beq", "x5", "x0", "out"]
    assert expand_pseudo(_pseudo(["bnez", "x5", "out"]))[0].symbols == ["bne", "x5", "x0", "out"]


def test_expand_li_small():
    assert expand_pseudo(_pseudo(["li", "x5", "7"]))[0].symbols == ["addi", "x5", "x0", "7"]


def test_expand_li_carry():
    out = expand_pseudo(_pseudo(["li", "x5", "0x12345FFF"]))
    assert [it.symbols for it in out] == [["lui", "x5", "0x12346"],
                                          ["addi", "x5", "x5", "-1"]]
    # identity: (hi << 12) + lo == value mod 2^32
    assert ((0x12346 << 12) + (-1)) & 0xFFFFFFFF == 0x12345FFF


def test_expand_li_out_of_range():
    with pytest.raises(isa.ImmediateOutOfRange):
        expand_pseudo(_pseudo(["li", "x5", "0x100000000"]))


def test_expand_la_uses_label_address():
    out = expand_pseudo(_pseudo(["la", "x5", "msg"]), {"msg": 0x10000004})
    assert [it.symbols for it in out] == [["lui", "x5", "0x10000"],
                                          ["addi", "x5", "x5", "4"]]


def test_expand_la_undefined():
    with pytest.raises(UndefinedLabel):
        expand_pseudo(_pseudo(["la", "x5", "msg"]), {})


def test_expansion_keeps_line_and_addresses():
    item = _pseudo(["li", "x5", "0x12345FFF"])
    item.line = 9
    out = expand_pseudo(item)
    assert [it.line for it in out] == [9, 9]
    assert [it.address for it in out] == [0x100, 0x104]


def test_split_hi_lo_identity():
    import random
    rng = random.Random(5)
    for _ in range(2000):
        value = rng.randrange(1 << 32)
        hi, lo = split_hi_lo(value)
        assert 0 <= hi < (1 << 20)
        assert -2048 <= lo <= 2047
        assert ((hi << 12) + lo) & 0xFFFFFFFF == value


# -------------------------------------------------------------- directives

def _directive(symbols):
    return ProgramItem(symbols=symbols, kind="directive", line=1)


def test_word_directive():
    payload, start, cursor = process_directive(_directive([".word", "1", "2"]), 0x10000000)
    assert start == 0x10000000
    assert cursor == 0x10000008
    assert payload == b"\x01\x00\x00\x00\x02\x00\x00\x00"


def test_string_directive_little_endian_packing():
    prog = assemble('.data\n.string "ok"\n', CFG)
    assert prog.data_image == [(0x10000000, 0x00006B6F)]


def test_half_byte_alignment():
    payload, start, cursor = process_directive(_directive([".half", "1"]), 0x10000001)
    assert start == 0x10000002 and cursor == 0x10000004
    payload, start, cursor = process_directive(_directive([".byte", "255", "-1"]), 0x10000001)
    assert start == 0x10000001 and payload == b"\xff\xff"


def test_space_directive():
    payload, start, cursor = process_directive(_directive([".space", "5"]), 0x10000000)
    assert payload == bytes(5) and cursor == 0x10000005


def test_unknown_directive():
    with pytest.raises(UnknownDirective):
        process_directive(_directive([".align", "8"]), 0x10000000)
    items, _ = parse_user(".data\n.align 8\n")
    assert "unknown directive" in errors_of(items)[0].error_message


def test_malformed_directive_operand():
    with pytest.raises(MalformedOperand):
        process_directive(_directive([".word", "banana"]), 0x10000000)
    with pytest.raises(MalformedOperand):
        process_directive(_directive([".byte", "256"]), 0x10000000)


def test_data_directive_outside_data_segment():
    items, _ = parse_user(".word 1\n")
    assert "outside .data" in errors_of(items)[0].error_message


def test_instruction_in_data_segment():
    items, _ = parse_user(".data\nnop\n")
    assert "outside .text" in errors_of(items)[0].error_message


def test_label_in_data_binds_to_aligned_word():
    prog = assemble('.data\n.byte 1\nv:\n.word 7\n.text\nla a0, v\n', CFG)
    assert prog.labels["v"] == 0x10000004
    assert (0x10000004, 7) in prog.data_image


# ------------------------------------------------------- resolve and encode

def test_branch_to_next_instruction_is_plus_4():
    prog = assemble("beq x0, x0, next\nnext: nop\n", CFG)
    user_words = [w for _, w, it in prog.text_image if not it.is_kernel]
    decoded = isa.decode(user_words[0])
    assert decoded.mnemonic == "beq" and decoded.imm == 4


def test_undefined_label():
    wrap = wrap_with_kernel("beq x0, x0, nowhere\n", CFG)
    items, labels = parse(wrap.source, wrap.kernel_lines, CFG)
    with pytest.raises(UndefinedLabel) as exc:
        resolve_and_encode(items, labels, CFG)
    assert exc.value.line == 3


def test_branch_out_of_range():
    # place the target > 4 KiB away
    body = "target: nop\n" + "nop\n" * 1100 + "beq x0, x0, target\n"
    with pytest.raises(Exception) as exc:
        assemble(body, CFG)
    assert "out of range" in str(exc.value)


def test_exit_self_jump_encoding():
    prog = assemble("", CFG)
    exit_word = dict((a, w) for a, w, _ in prog.text_image)[prog.exit_address]
    assert exit_word == 0x0000006F


def test_resolve_refuses_error_items():
    wrap = wrap_with_kernel("bogus\n", CFG)
    items, labels = parse(wrap.source, wrap.kernel_lines, CFG)
    with pytest.raises(AssemblyHasErrors):
        resolve_and_encode(items, labels, CFG)


def test_assemble_raises_with_all_errors():
    with pytest.raises(AssemblyError) as exc:
        assemble("addi x1\nbogus\n", CFG)
    assert len(exc.value.errors) == 2


def test_jalr_both_operand_orders():
    prog = assemble("jalr x1, x2, 4\njalr x1, 4(x2)\n", CFG)
    words = [w for _, w, it in prog.text_image if not it.is_kernel]
    assert words[0] == words[1]
    d = isa.decode(words[0])
    assert (d.rd, d.rs1, d.imm) == (1, 2, 4)


def test_load_store_offset_encoding():
    prog = assemble("lw x5, 8(gp)\nsw x5, -4(sp)\n", CFG)
    words = [w for _, w, it in prog.text_image if not it.is_kernel]
    lw, sw = isa.decode(words[0]), isa.decode(words[1])
    assert (lw.rd, lw.rs1, lw.imm) == (5, 3, 8)
    assert (sw.rs2, sw.rs1, sw.imm) == (5, 2, -4)


# -------------------------------------------------------------- invariants

def test_address_monotonicity_post_expansion():
    prog = assemble("li x5, 0x12345FFF\nnop\nla x6, spot\nspot: nop\n", CFG)
    addresses = [addr for addr, _, _ in prog.text_image]
    assert addresses == [CFG.text_base + 4 * k for k in range(len(addresses))]


def test_label_correctness():
    prog = assemble("a: nop\nb: li x5, 99999\nc: nop\n", CFG)
    instr_addrs = {addr for addr, _, _ in prog.text_image}
    for name, addr in prog.labels.items():
        assert addr in instr_addrs


def test_disassembly_round_trip():
    src = "addi x1, x0, 5\nadd x2, x1, x1\nsw x2, 0(gp)\nlw x3, 0(gp)\nbeq x3, x2, done\ndone: nop\n"
    prog = assemble(src, CFG)
    for addr, word, item in prog.text_image:
        decoded = isa.decode(word)
        assert decoded.mnemonic == item.symbols[0].lower()


def test_kernel_framing():
    prog = assemble("nop\n", CFG)
    items = prog.items
    assert items[0].is_kernel
    last = items[-1]
    assert last.symbols[0] == "jal" and last.address == prog.exit_address
    flags = [it.is_kernel for it in items if it.kind == INSTRUCTION]
    # kernel prefix, contiguous user block, kernel suffix
    changes = sum(1 for a, b in zip(flags, flags[1:]) if a != b)
    assert changes == 2

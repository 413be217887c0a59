"""Command line entry point: ``egg repl|run|eval|serve|bank``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .currency.bank import Bank, BankError, audit, parse_preferences
from .currency.checks import Check, CheckFormatError
from .currency.signing import SCHEMES, Identity

log = logging.getLogger("egg")


def egg_home() -> Path:
    return Path(os.environ.get("EGG_HOME", Path.home() / ".egg"))


def _load_rolodex(path: str | None):
    from .net.rolodex import Rolodex

    p = Path(path) if path else egg_home() / "rolodex.txt"
    return Rolodex.load(p) if p.exists() else None


def _shell(args):
    from .shell import ShellEnv

    return ShellEnv.create(tilde_dir=args.tilde, rolodex=_load_rolodex(args.rolodex), plugins=args.plugin)


# -- shell commands ------------------------------------------------------------

def cmd_repl(args) -> int:
    from .shell.repl import repl

    repl(_shell(args))
    return 0


def cmd_run(args) -> int:
    return _shell(args).run_script(args.script)


def cmd_eval(args) -> int:
    from .shell.parser import ParseError

    env = _shell(args)
    try:
        result = env.execute_line(args.line)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    print(env.algebra.render(result) if args.raw else env.display(result))
    return 1 if env.algebra.has_error(result) else 0


def cmd_serve(args) -> int:
    from .net.server import ServerConfig, serve
    from .shell import ShellEnv

    identity = Identity.load(args.key)
    prefs = parse_preferences(Path(args.prefs).read_text())
    if not prefs:
        print("preference table is empty: the server would refuse everyone", file=sys.stderr)
        return 2
    rolodex = _load_rolodex(args.rolodex)
    bank_dir = Path(args.bank) if args.bank else None
    directory = rolodex.directory() if rolodex else {}
    if bank_dir and (bank_dir / "ledger.jsonl").exists():
        bank = Bank.open(bank_dir, directory)
        bank.preferences = prefs
    else:
        bank = Bank(identity, prefs, directory)
    env = ShellEnv.create(rolodex=rolodex)
    root = env.load_hatch(args.root) if args.root else env.algebra.singleton({"type": "storage"})
    config = ServerConfig(bank, root, args.port, args.host, env.algebra)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    serve(config)
    return 0


# -- bank commands -------------------------------------------------------------

def _bank_dir(args) -> Path:
    return Path(args.bank) if args.bank else egg_home() / "bank"


def _open_bank(args) -> Bank:
    rolodex = _load_rolodex(args.rolodex)
    return Bank.open(_bank_dir(args), rolodex.directory() if rolodex else {})


def _recipient(args, who: str) -> bytes:
    rolodex = _load_rolodex(args.rolodex)
    if rolodex is not None and who in rolodex and rolodex.key_of(who):
        return rolodex.key_of(who)
    try:
        return bytes.fromhex(who)
    except ValueError:
        raise BankError(f"unknown recipient {who!r}: not in the rolodex and not a hex key") from None


def _find(bank: Bank, prefix: str) -> Check:
    hits = [c for c in bank.vault.values() if c.tracking.startswith(prefix)]
    if len(hits) != 1:
        raise BankError(f"{len(hits)} vault checks match tracking prefix {prefix!r}")
    return hits[0]


def _emit(bank: Bank, c: Check, out: str | None) -> None:
    if out:
        Path(out).write_text(c.hex() + "\n")
    print(bank.display(c, show_date=True), file=sys.stderr if not out else sys.stdout)
    if not out:
        print(c.hex())


def _amount(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise BankError(f"not an amount: {text!r}") from None


def cmd_bank(args) -> int:
    try:
        return _bank(args)
    except (BankError, CheckFormatError, OSError, ValueError) as exc:
        print(f"egg bank: {exc}", file=sys.stderr)
        return 1


def _bank(args) -> int:
    action = args.action
    if action == "init":
        scheme = SCHEMES[args.scheme]
        bank = Bank.create(_bank_dir(args), args.name, scheme)
        print(f"{bank.identity.name} {bank.key.hex()}")
        return 0
    bank = _open_bank(args)
    if action == "key":
        print(bank.key.hex())
    elif action == "mint":
        to = _recipient(args, args.to) if args.to else None
        _emit(bank, bank.mint(_amount(args.amount), to, payment=args.payment), args.out)
    elif action == "give":
        _emit(bank, bank.transfer_gift(_find(bank, args.check), _recipient(args, args.to)), args.out)
    elif action == "pay":
        payment, change = bank.pay(_find(bank, args.check), _amount(args.amount), _recipient(args, args.to))
        _emit(bank, payment, args.out)
    elif action == "deposit":
        c = bank.settle(Check.from_hex(Path(args.file).read_text()))
        _emit(bank, c, args.out if c.owner != bank.key else None)
    elif action == "cash":
        _emit(bank, bank.cash_and_return(_find(bank, args.check)), args.out)
    elif action == "list":
        for c in sorted(bank.checks(), key=lambda c: c.tracking):
            kind = "receipt" if c.to_bytes() in bank.receipts else "payment" if c.has_payment() else "check"
            print(f"{c.tracking[:10]}  {kind:8} {bank.display(c, show_date=True)}")
        print(f"balance {bank.balance()}")
    elif action == "audit":
        checks = bank.checks() + [Check.from_hex(Path(f).read_text()) for f in args.files]
        findings = audit(checks, bank.scheme)
        for f in findings:
            print(f"{f.kind}\t{f.tracking}\t{f.detail}")
        return 1 if findings else 0
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="egg", description="cache algebra shell, server and bank")
    p.add_argument("--rolodex", help="rolodex file (default $EGG_HOME/rolodex.txt)")
    sub = p.add_subparsers(dest="command", required=True)

    def shell_opts(sp):
        sp.add_argument("--tilde", help="directory exported as ~")
        sp.add_argument("--plugin", action="append", default=[], help="plugin directory (repeatable)")

    sp = sub.add_parser("repl", help="interactive shell")
    shell_opts(sp)
    sp.set_defaults(func=cmd_repl)

    sp = sub.add_parser("run", help="execute a script file")
    sp.add_argument("script")
    shell_opts(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="evaluate one line")
    sp.add_argument("line")
    sp.add_argument("--raw", action="store_true", help="print the rendered cache")
    shell_opts(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("serve", help="run a payment-gated cache server")
    sp.add_argument("--port", type=int, required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--key", required=True, help="server identity key file")
    sp.add_argument("--prefs", required=True, help="preference table file")
    sp.add_argument("--root", help="hatch file whose cache is exported")
    sp.add_argument("--bank", help="bank directory that keeps earnings")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("bank", help="currency operations")
    sp.add_argument("--bank", help="bank directory (default $EGG_HOME/bank)")
    bsub = sp.add_subparsers(dest="action", required=True)
    b = bsub.add_parser("init")
    b.add_argument("name")
    b.add_argument("--scheme", choices=sorted(SCHEMES), default="ed25519")
    bsub.add_parser("key")
    b = bsub.add_parser("mint")
    b.add_argument("amount")
    b.add_argument("--to")
    b.add_argument("--payment", action="store_true")
    b.add_argument("--out")
    b = bsub.add_parser("give")
    b.add_argument("check", help="tracking number prefix")
    b.add_argument("to")
    b.add_argument("--out")
    b = bsub.add_parser("pay")
    b.add_argument("check")
    b.add_argument("amount")
    b.add_argument("to")
    b.add_argument("--out")
    b = bsub.add_parser("deposit")
    b.add_argument("file")
    b.add_argument("--out")
    b = bsub.add_parser("cash")
    b.add_argument("check")
    b.add_argument("--out")
    bsub.add_parser("list")
    b = bsub.add_parser("audit")
    b.add_argument("files", nargs="*", help="extra receipts to examine")
    sp.set_defaults(func=cmd_bank)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Write the synthetic WT-like / FKO-like container set plus a run config.

    python scripts/make_fixtures.py out/fixtures --per-group 3
"""
import argparse

from organoquant.synthetic import write_fixture_set


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--per-group", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = write_fixture_set(args.out_dir, args.per_group, args.seed)
    n = sum(len(g["files"]) for g in cfg["groups"])
    print(f"wrote {n} containers and config.json to {args.out_dir}")


if __name__ == "__main__":
    main()

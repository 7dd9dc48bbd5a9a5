# Built-in behaviour tables in the delimited text format read by
# universal.load_behaviour_table / universal.load_ca_rule and
# encoders.load_fsa.

# (2,4) Turing machine: 2 states (A, B), 4 symbols (0-3).
# Columns: state, read symbol, write symbol, head move, next state.
TM_2_4 = """# state\tread\twrite\tmove\tnext
A\t0\t2\tL\tA
A\t1\t3\tL\tB
A\t2\t3\tL\tA
A\t3\t3\tL\tA
B\t0\t3\tR\tA
B\t1\t2\tL\tB
B\t2\t0\tR\tB
B\t3\t1\tR\tB
"""

TM_2_4_START = "A"
TM_2_4_BLANK = "0"

# Elementary CA rule 110, one neighbourhood per row (left, centre, right -> next centre).
RULE_110 = """# neighbourhood\tnext
111\t0
110\t1
101\t1
100\t0
011\t1
010\t1
001\t1
000\t0
"""

# Coin-operated turnstile. Columns: state, input symbol, next state.
TURNSTILE = """# start=locked accepting=unlocked
# state\tsymbol\tnext
locked\tpush\tlocked
locked\ttoken\tunlocked
unlocked\tpush\tlocked
unlocked\ttoken\tunlocked
"""

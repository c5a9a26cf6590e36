"""Reference mention/call counts (n=160 text samples) and call-rate rows."""

TEXT_N = 160

# name: (text mentions, reference mention CI in %, actual calls, expected verdict)
CROSSREF_ROWS = {
    "print_tree": (45, (21.2, 35.0), 101, "confirmed"),
    "search": (55, (27.5, 42.5), 11, "confirmed"),
    "open_file": (71, (36.9, 52.5), 3, "confirmed"),
    "apply_patch": (4, (0.6, 5.0), 8, "confirmed"),
    "read_file": (40, (18.8, 31.9), 1, "likely alias"),
    "list_files": (17, (6.2, 15.6), 2, "likely alias"),
    "delete_file": (14, (5.0, 13.1), 0, "confabulated"),
    "write_file": (12, (3.8, 11.9), 0, "confabulated"),
}
MENTION_RATES = {
    "print_tree": 28.1, "search": 34.4, "open_file": 44.4, "apply_patch": 2.5,
    "read_file": 25.0, "list_files": 10.6, "delete_file": 8.8, "write_file": 7.5,
}

# tool: (baseline rate, with-tools rate, reference lift, rounding tolerance)
LIFT_ROWS = {
    "print_tree": (0.294, 0.986, 3.4, 0.1),
    "search": (0.038, 0.588, 15.0, 1.0),
}

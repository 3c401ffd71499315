"""
From formulas to a sparse tensor
================================

Binary compounds become cells of an order-4 tensor: two element modes
followed by two count modes.
"""

# %%
# Parsing is order-insensitive: both spellings give one composition.
from tensorprop.tensorize import TensorizeConfig, parse_formula, tensorize

print(parse_formula("AuBr5"))
print(parse_formula("Br5Au") == parse_formula("AuBr5"))

# %%
# A handful of records, some of which cannot be encoded.
records = [
    ("AuBr5", 1.32),
    ("Br5Au", 1.40),   # same cell as above; averaged
    ("NaCl", 5.00),
    ("H2O", 6.90),
    ("Fe2O3", 2.20),
    ("Fe2O3Al", 1.0),  # ternary, wrong arity
    ("NaCl12", 1.0),   # count beyond max_count
    ("Xx2O", 0.0),     # unknown symbol
]
tensor, report = tensorize(records, TensorizeConfig(max_count=8))
print(tensor)
print(report.as_dict())

# %%
# Count k lives at index k - 1; element labels share one alphabet.
for coord, value in tensor.entries():
    print(coord, tensor.index_map.decode(coord), value)

# %%
# The text format round-trips values exactly.
from tensorprop.sptensor import SparseTensor

text = tensor.to_text()
print(text)
again = SparseTensor.from_text(text)
print((again.values == tensor.values).all())

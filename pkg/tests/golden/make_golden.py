"""Reference serializer for the fixture transaction, written independently of
the package. Produces tests/golden/fixture_tx.bin. Run once; the output is
checked in and must never be regenerated from settlesim itself."""
import pathlib

def u8(x): return bytes([x])
def u16(x): return x.to_bytes(2, "little")
def u64(x): return x.to_bytes(8, "little")
def s(text):
    raw = text.encode("utf-8")
    return u16(len(raw)) + raw

tx_id = bytes(range(16))
out = (
    tx_id
    + u64(1_234_567)          # timestamp_ms
    + s("OP-ALPHA")           # sender
    + s("OP-BETA")            # receiver
    + u64(500_000)            # amount
    + s("USD")                # currency
    + u64(3_250)              # fee
    + u64(750)                # withholding
    + u8(4)                   # status Appended
    + u8(1)                   # verdict Passed
    + u8(0)                   # reject reason none
)
pathlib.Path(__file__).with_name("fixture_tx.bin").write_bytes(out)
print(out.hex())

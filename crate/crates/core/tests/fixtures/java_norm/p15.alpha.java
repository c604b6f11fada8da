interface Meter {
    // variant build
    int read();
}

public class WaterMeter implements Meter {
    private int stored;

    public WaterMeter(int init) {
        stored = init;
    }

    public int read() {
        return stored;
    }

    public static void main(String[] argv) {
        Meter device = new WaterMeter(88);
        System.out.println(device.read());
    }
}

public class Fares {
    // variant build
    public static int fare(int z, boolean rush) {
        int cost = z * 120;
        return rush ? cost + 50 : cost;
    }

    public static void main(String[] argv) {
        System.out.println(fare(3, true));
    }
}
